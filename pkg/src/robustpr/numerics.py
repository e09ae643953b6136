"""Low-level numeric kernels.

Real roots of cubics and quartics in closed form (Cardano / Ferrari) with
Newton polishing, a zero-safe phase helper and power-iteration spectral
norm estimation.

The ``cubic_roots`` / ``quartic_roots`` functions are vectorized over
leading axes and return NaN-padded root arrays; they are what the
proximal kernels use.  ``real_roots_cubic`` / ``real_roots_quartic`` are
the scalar, list-returning front ends.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

# a conjugate pair whose imaginary part is below this (relative) size is
# reported as a (double) real root
NEAR_REAL_TOL = 1e-8
# distinct roots closer than this (relative) are reported once
MERGE_TOL = 1e-7
# leading coefficient this small relative to the next one: split off the
# huge root instead of shifting by it (the shift would wipe out the others)
SPLIT_TOL = 1e-6
# scalar front ends drop "roots" whose backward error exceeds this (only
# reached when intermediate quantities overflow for extreme coefficients)
BACKWARD_TOL = 1e-6

_SQRT3_2 = np.sqrt(3.0) / 2.0


def _polish(coeffs, roots, steps=2):
    """Newton steps on the polynomial ``coeffs`` (descending, last axis),
    accepting a step only where it lowers the residual."""
    deg = coeffs.shape[-1] - 1
    c = coeffs[..., None, :]
    dc = c[..., :-1] * np.arange(deg, 0, -1)
    ok = np.isfinite(roots)
    r = np.where(ok, roots, 0.0)
    val = _horner(c, r)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(steps):
            cand = r - val / _horner(dc, r)
            good = np.isfinite(cand)
            cval = _horner(c, np.where(good, cand, 0.0))
            better = good & (np.abs(cval) < np.abs(val))
            r = np.where(better, cand, r)
            val = np.where(better, cval, val)
    return np.where(ok, r, np.nan)


def _horner(c, x):
    out = c[..., 0] * x
    for k in range(1, c.shape[-1] - 1):
        out += c[..., k]
        out *= x
    return out + c[..., -1]


def _near_real(re, im):
    return np.abs(im) <= NEAR_REAL_TOL * np.maximum(1.0, np.abs(re))


def _quadratic(a, b, c):
    """Real roots of ``a x^2 + b x + c`` with ``a != 0`` (NaN where complex)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - 4.0 * a * c
        sq = np.sqrt(np.abs(disc))
        sgn = np.where(b >= 0, 1.0, -1.0)
        qq = -0.5 * (b + sgn * sq)
        r1 = qq / a
        r2 = np.where(qq != 0, c / qq, -b / (2 * a))
        re = -b / (2.0 * a)
        im = sq / (2.0 * np.abs(a))
    real = disc >= 0
    dbl = ~real & _near_real(re, im)
    r1 = np.where(real, r1, np.where(dbl, re, np.nan))
    r2 = np.where(real, r2, np.where(dbl, re, np.nan))
    return r1, r2


def _depressed_cubic(p, q):
    """Real roots of ``t^3 + p t + q`` as an (..., 3) array, NaN-padded."""
    out = np.full(np.shape(p) + (3,), np.nan)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        delta = (q / 2.0) ** 2 + (p / 3.0) ** 3
        one = delta > 0
        sq = np.sqrt(np.where(one, delta, 0.0))
        sgn = np.where(q >= 0, 1.0, -1.0)
        A = -sgn * np.cbrt(np.abs(q) / 2.0 + sq)
        B = np.where(A != 0, -p / (3.0 * A), 0.0)
        pair_re = -(A + B) / 2.0
        pair_im = _SQRT3_2 * (A - B)
        out[..., 0] = np.where(one, A + B, out[..., 0])
        dbl = one & _near_real(pair_re, pair_im)
        out[..., 1] = np.where(dbl, pair_re, out[..., 1])

        three = ~one
        pn = np.where(three & (p < 0), p, -1.0)
        m = 2.0 * np.sqrt(-pn / 3.0)
        arg = np.clip(3.0 * q / (pn * m), -1.0, 1.0)
        th = np.arccos(arg) / 3.0
        for k in range(3):
            tk = m * np.cos(th - 2.0 * np.pi * k / 3.0)
            tk = np.where(p == 0, 0.0, tk)
            out[..., k] = np.where(three, tk, out[..., k])
    return out


def _monic_cubic(a2, a1, a0):
    shift = a2 / 3.0
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2**3 / 27.0 - a2 * a1 / 3.0 + a0
    return _depressed_cubic(p, q) - shift[..., None]


def _monic_quartic(a3, a2, a1, a0):
    shift = a3 / 4.0
    p = a2 - 3.0 * a3**2 / 8.0
    q = a1 - a2 * a3 / 2.0 + a3**3 / 8.0
    r = a0 - a1 * a3 / 4.0 + a2 * a3**2 / 16.0 - 3.0 * a3**4 / 256.0
    out = np.full(np.shape(a3) + (4,), np.nan)

    # resolvent 8m^3 + 8p m^2 + (2p^2 - 8r) m - q^2: its largest real root is >= 0
    res = np.stack([np.ones_like(p), p, (p * p - 4.0 * r) / 4.0, -q * q / 8.0], axis=-1)
    mr = _polish(res, _monic_cubic(p, (p * p - 4.0 * r) / 4.0, -q * q / 8.0), steps=1)
    m = np.nanmax(np.where(np.isfinite(mr), mr, -np.inf), axis=-1)
    m = np.maximum(m, 0.0)

    scale = np.maximum.reduce([np.abs(p), np.sqrt(np.abs(r)), np.abs(q) ** (2.0 / 3.0), np.ones_like(p) * 1e-300])
    biq = m <= 1e-14 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        # biquadratic branch: z^2 + p z + r, y = +-sqrt(z)
        z1, z2 = _quadratic(np.ones_like(p), p, r)
        for k, z in enumerate((z1, z2)):
            tiny = np.isfinite(z) & (z < 0) & (np.abs(z) <= NEAR_REAL_TOL**2 * np.maximum(1.0, scale))
            z = np.where(tiny, 0.0, z)
            zs = np.sqrt(np.where(np.isfinite(z) & (z >= 0), z, np.nan))
            out[..., 2 * k] = np.where(biq, zs, out[..., 2 * k])
            out[..., 2 * k + 1] = np.where(biq, -zs, out[..., 2 * k + 1])

        # Ferrari factorization into two quadratics
        sm = np.sqrt(2.0 * np.where(biq, 1.0, m))
        half = p / 2.0 + m
        corr = q / (2.0 * sm)
        one = np.ones_like(p)
        y1, y2 = _quadratic(one, -sm, half + corr)
        y3, y4 = _quadratic(one, sm, half - corr)
        for k, y in enumerate((y1, y2, y3, y4)):
            out[..., k] = np.where(biq, out[..., k], y)
    return out - shift[..., None]


def _prepare(coeffs, n):
    c = np.asarray(coeffs, dtype=float)
    if c.shape[-1] != n:
        raise ValueError(f"expected {n} coefficients, got {c.shape[-1]}")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    return c


def cubic_roots(coeffs) -> np.ndarray:
    """Real roots of ``a x^3 + b x^2 + c x + d`` along the last axis.

    Parameters
    ----------
    coeffs : array_like, shape (..., 4)
        Descending coefficients.  Leading zeros reduce the degree.

    Returns
    -------
    ndarray, shape (..., 3)
        Real roots, NaN where absent.  Rows whose coefficients are all
        zero come back all-NaN.
    """
    c = _prepare(coeffs, 4)
    a, b, cc, d = np.moveaxis(c, -1, 0)
    out = np.full(c.shape[:-1] + (3,), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        cub = a != 0
        split = cub & (np.abs(a) <= SPLIT_TOL * np.abs(b))
        sa = np.where(cub, a, 1.0)
        r = _monic_cubic(b / sa, cc / sa, d / sa)
        out = np.where(cub[..., None], r, out)
        if np.any(split):
            sub = c[split]
            big = _polish(sub, (-sub[:, 1] / sub[:, 0])[:, None], steps=4)[:, 0]
            l1, l2 = _quadratic(sub[:, 1], sub[:, 2], sub[:, 3])
            out[split] = _polish(sub, np.stack([big, l1, l2], axis=-1), steps=3)

        quad = ~cub & (b != 0)
        sb = np.where(quad, b, 1.0)
        q1, q2 = _quadratic(sb, cc, d)
        out[..., 0] = np.where(quad, q1, out[..., 0])
        out[..., 1] = np.where(quad, q2, out[..., 1])

        lin = ~cub & ~quad & (cc != 0)
        out[..., 0] = np.where(lin, -d / np.where(lin, cc, 1.0), out[..., 0])
    return _polish(c, out)


def quartic_roots(coeffs) -> np.ndarray:
    """Real roots of a quartic along the last axis, NaN-padded to (..., 4).

    Rows with a zero leading coefficient fall back to :func:`cubic_roots`.
    """
    c = _prepare(coeffs, 5)
    flat = c.reshape(-1, 5)
    out = np.full((flat.shape[0], 4), np.nan)
    lead, nxt = flat[:, 0], flat[:, 1]
    split = (lead != 0) & (np.abs(lead) <= SPLIT_TOL * np.abs(nxt))
    quart = (lead != 0) & ~split
    idx = np.flatnonzero(split)
    if idx.size:
        sub = flat[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            big = _polish(sub, (-sub[:, 1] / sub[:, 0])[:, None], steps=4)
        out[idx] = _polish(sub, np.concatenate([big, cubic_roots(sub[:, 1:])], axis=-1), steps=3)
    idx = np.flatnonzero(quart)
    if idx.size:
        sub = flat[idx]
        mc = sub[:, 1:] / sub[:, :1]
        r = _monic_quartic(mc[:, 0], mc[:, 1], mc[:, 2], mc[:, 3])
        out[idx] = _polish(sub, r, steps=2)
    idx = np.flatnonzero(lead == 0)
    if idx.size:
        out[idx, :3] = cubic_roots(flat[idx, 1:])
    return out.reshape(c.shape[:-1] + (4,))


def backward_error(coeffs, r) -> float:
    """``|p(r)| / sum_k |c_k| |r|^k``, evaluated without overflow."""
    c = np.asarray(coeffs, dtype=float)
    if abs(r) > 1.0:
        c, r = c[::-1], 1.0 / r
    with np.errstate(over="ignore", invalid="ignore"):
        num = abs(np.polyval(c, r))
        den = np.polyval(np.abs(c), abs(r))
    return float(num / den) if den > 0 else 0.0


def _finalize(coeffs, roots):
    rs = np.sort(roots[np.isfinite(roots)])
    keep = []
    for r in rs:
        if backward_error(coeffs, r) > BACKWARD_TOL:
            continue
        if keep and abs(r - keep[-1]) < MERGE_TOL * max(1.0, abs(r)):
            continue
        keep.append(float(r))
    return keep


def real_roots_cubic(coeffs) -> list[float]:
    """Distinct real roots of a cubic given descending coefficients.

    >>> real_roots_cubic([2, 0, -1, -1])
    [1.0]
    """
    c = _prepare(coeffs, 4)
    if not np.any(c):
        raise ValueError("identically zero polynomial")
    with np.errstate(all="ignore"):
        return _finalize(c, cubic_roots(c))


def real_roots_quartic(coeffs) -> list[float]:
    """Distinct real roots of a quartic given descending coefficients."""
    c = _prepare(coeffs, 5)
    if not np.any(c):
        raise ValueError("identically zero polynomial")
    with np.errstate(all="ignore"):
        return _finalize(c, quartic_roots(c))


def unit_phase(z):
    """``z / |z|``, with the convention ``unit_phase(0) == 1``.

    Works elementwise on arrays.
    """
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    out = np.ones_like(z)
    with np.errstate(over="ignore", invalid="ignore"):
        np.divide(z, mag, out=out, where=mag > 0)
    bad = ~np.isfinite(out)
    if np.any(bad):
        # subnormal moduli overflow the division
        out[bad] = np.exp(1j * np.angle(z[bad]))
    return out if out.ndim else complex(out)


class SpectralNorm(NamedTuple):
    value: float
    converged: bool


def spectral_norm(op, max_iters: int = 200, tol: float = 1e-8, seed: int = 0) -> SpectralNorm:
    """Largest singular value of ``op`` by power iteration on ``A'A``.

    If the estimate has not settled to relative tolerance ``tol`` within
    ``max_iters`` iterations, the last estimate is inflated by 5% (an
    overestimate keeps gradient step sizes safe) and ``converged`` is False.
    """
    rng = np.random.default_rng(seed)
    n = op.input_dim
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iters):
        w = op.adjoint(op.apply(v))
        lam = np.linalg.norm(w)
        if lam == 0:
            return SpectralNorm(0.0, True)
        new = float(np.sqrt(lam))
        v = w / lam
        if abs(new - sigma) <= tol * new:
            return SpectralNorm(new, True)
        sigma = new
    return SpectralNorm(1.05 * sigma, False)
