"""Independent reference implementations used as test oracles.

Nothing here calls into the code under test: the majorizer is rebuilt from
its definition, roots come from companion-matrix eigenvalues, prox
minimizers from a dense grid plus pattern-search refinement, and alignment
from exhaustive enumeration.
"""

import numpy as np


def companion_real_roots(coeffs, imag_tol=1e-8):
    """Real parts of companion-matrix eigenvalues with negligible imaginary part."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=float), "f")
    if len(c) <= 1:
        return []
    ev = np.linalg.eigvals(np.polynomial.polynomial.polycompanion(c[::-1]))
    return sorted(float(e.real) for e in ev if abs(e.imag) <= imag_tol * max(1.0, abs(e)))


def phi_ref(t, s, y, q=2.0):
    """Convex majorizer of ``|y - |t|^q|`` about ``s``, written out case by case."""
    t = complex(t)
    s = complex(s)
    hp = abs(t) ** q - y
    if y <= 0:
        return hp
    if abs(s) ** q >= y:
        s = y ** (1.0 / q) * s / abs(s)
    if s == 0:
        # (q-1)|s|^q and the linear term both vanish
        tangent = y
    else:
        ph = s / abs(s)
        tangent = y + (q - 1) * abs(s) ** q - q * abs(s) ** (q - 1) * (t * ph.conjugate()).real
    return max(hp, tangent)


def prox_objective_ref(u, y, s, d, mu, p):
    phi = phi_ref(u, s, y)
    return (phi if p == 1 else phi * phi) + 0.5 * mu * abs(u - d) ** 2


def _vec_objective(U, y, s, d, mu, p):
    hp = np.abs(U) ** 2 - y
    if y <= 0:
        phi = hp
    else:
        se = s
        if abs(se) ** 2 >= y:
            se = np.sqrt(y) * se / abs(se)
        tangent = y + abs(se) ** 2 - 2.0 * np.real(U * np.conj(se))
        phi = np.maximum(hp, tangent)
    fit = phi if p == 1 else phi * phi
    return fit + 0.5 * mu * np.abs(U - d) ** 2


def prox_grid_oracle(y, s, d, mu, p, step=1e-2, tol=1e-8, max_pts=400, n_starts=5):
    """Minimize the u-update objective over a grid on the disk
    ``|u| <= 3(sqrt(y) + |s| + |d|)``, then refine the ``n_starts`` best grid
    points by pattern search down to ``tol``.

    The grid is clipped to the box around ``d`` outside of which the
    quadratic term alone exceeds the objective at ``u = d``.  Its spacing
    is ``step``, widened if needed to keep at most ``max_pts`` per axis.
    """
    s, d = complex(s), complex(d)
    R = 3.0 * (np.sqrt(max(y, 0.0)) + abs(s) + abs(d)) + 1e-9
    g_d = _vec_objective(np.array([d]), y, s, d, mu, p)[0]
    rad = np.sqrt(max(g_d, 0.0) / (0.5 * mu)) + step
    lo_r, hi_r = max(-R, d.real - rad), min(R, d.real + rad)
    lo_i, hi_i = max(-R, d.imag - rad), min(R, d.imag + rad)
    h = max(step, max(hi_r - lo_r, hi_i - lo_i) / max_pts)
    xs = np.arange(lo_r, hi_r + h, h)
    ys = np.arange(lo_i, hi_i + h, h)
    U = (xs[:, None] + 1j * ys[None, :]).ravel()
    G = _vec_objective(U, y, s, d, mu, p)
    k = min(n_starts, G.size)
    starts = np.argpartition(G, k - 1)[:k]
    moves = np.array([1, -1, 1j, -1j, 1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j])
    best, val = None, np.inf
    for j in starts:
        u, v, hh = U[j], G[j], h
        while hh > tol:
            cand = u + hh * moves
            cv = _vec_objective(cand, y, s, d, mu, p)
            i = int(np.argmin(cv))
            if cv[i] < v:
                u, v = cand[i], cv[i]
            else:
                hh /= 2
        if v < val:
            best, val = u, v
    return best, float(val)


def random_prox_problem(rng, branch):
    """``branch`` 0: y <= 0; 1: |s|^2 < y; 2: |s|^2 >= y."""
    y = -rng.uniform(0.0, 1.0) if branch == 0 else rng.uniform(0.05, 1.5)
    s = complex(rng.standard_normal(), rng.standard_normal())
    if branch == 1:
        s *= np.sqrt(y) * rng.uniform(0.0, 0.99) / abs(s)
    elif branch == 2:
        s *= np.sqrt(y) * rng.uniform(1.0, 2.0) / abs(s)
    d = complex(rng.standard_normal(), rng.standard_normal())
    mu = float(np.exp(rng.uniform(np.log(0.1), np.log(10.0))))
    return y, s, d, mu


def dft_matrix(n):
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def exhaustive_alignment_residual(x_hat, x_true):
    """Smallest ``||e^{i a} T(x_hat) - x_true||`` over all circular shifts
    and the four reflection variants, with the optimal phase for each."""
    n = len(x_true)
    best = np.inf
    idx = np.arange(n)
    for rev in (False, True):
        for conj in (False, True):
            v = x_hat[(-idx) % n] if rev else x_hat
            v = np.conj(v) if conj else v
            for k in range(n):
                w = np.roll(v, -k)
                c = np.vdot(w, x_true)
                ph = c / abs(c) if abs(c) > 0 else 1.0
                best = min(best, np.linalg.norm(ph * w - x_true))
    return best
