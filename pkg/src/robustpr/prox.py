"""Per-variable minimization kernels used inside ADMM.

The u-updates solve, elementwise,

    argmin_u  f(phi(u; s, y)) + (mu/2) |u - d|^2

for squared-magnitude data (q = 2), where ``phi`` is the convex majorizer
and ``f`` is identity (Laplace) or square (Gaussian).  The minimizer is
one of three kinds of stationary point: the unconstrained minimizer of
the ``h+`` branch, of the tangent-plane branch, or a point on the curve
where both branches are equal.  Every candidate is scored with the true
objective and the best one wins, which sidesteps fragile case logic at
branch boundaries.

All kernels broadcast over arrays of any shape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .majorizer import effective_point
from .numerics import cubic_roots, quartic_roots, spectral_norm
from .numerics import unit_phase as _unit_phase


def unit_phase(z):
    return np.asarray(_unit_phase(z))

TAG_NAMES = ("u_plus", "u_minus", "u_pm", "origin")
U_PLUS, U_MINUS, U_PM, ORIGIN = range(4)


@dataclass
class ProxResult:
    u: np.ndarray
    objective: np.ndarray
    tag: np.ndarray

    @property
    def tag_names(self):
        return np.asarray(TAG_NAMES)[self.tag]


def soft_threshold(x, tau):
    """Complex soft thresholding: shrink ``|x|`` by ``tau``, keep the phase."""
    x = np.asarray(x, dtype=complex)
    a = np.abs(x)
    gain = np.asarray(np.maximum(a - tau, 0.0))
    np.divide(gain, a, out=gain, where=gain > 0)
    out = x * gain
    return out if np.ndim(out) else complex(out)


def x_update_unitary(op, u, b, beta, mu):
    """Exact x-update for a left-unitary operator (``A'A = I``)."""
    if not op.left_unitary:
        raise ValueError("x_update_unitary needs a left-unitary operator; use x_update_fista")
    return soft_threshold(op.adjoint(u - b), beta / mu)


def lipschitz_constant(op, mu):
    """``c`` with ``c I >= mu A'A``: ``mu`` for (left or right) unitary
    operators, otherwise ``mu * sigma_max^2`` inflated by 5%."""
    if op.left_unitary or op.right_unitary:
        return mu
    sigma = spectral_norm(op).value
    return mu * 1.05 * sigma**2


def x_update_objective(op, x, v, beta, mu):
    """``beta ||x||_1 + (mu/2) ||Ax - v||^2``, summed over the last axis."""
    r = op.apply(x) - v
    mu = np.asarray(mu, dtype=float)
    if mu.ndim and mu.ndim == np.ndim(x):
        mu = mu[..., 0]
    return beta * np.abs(x).sum(axis=-1) + 0.5 * mu * (np.abs(r) ** 2).sum(axis=-1)


def x_update_fista(op, u, b, beta, mu, x0, iters: int = 25, c=None):
    """Approximate x-update by FISTA, warm-started at ``x0``.

    ``mu`` may be a scalar or an array broadcasting against ``x0`` (one
    value per row).  Rows whose objective ended above the warm start fall
    back to ``x0``, so the returned point never does worse than ``x0``.
    """
    if iters < 1:
        raise ValueError("FISTA needs at least one iteration")
    if c is None:
        c = lipschitz_constant(op, mu)
    v = u - b
    step = mu / c
    thr = beta / c
    w = op.adjoint(v)
    normal = getattr(op, "normal", None) or (lambda z: op.adjoint(op.apply(z)))
    x_prev = np.asarray(x0, dtype=complex)
    z = x_prev
    t = 1.0
    for _ in range(iters):
        x = soft_threshold(z + step * (w - normal(z)), thr)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        z = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_prev, t = x, t_next
    worse = x_update_objective(op, x, v, beta, mu) > x_update_objective(op, x0, v, beta, mu)
    return np.where(worse[..., None], x0, x) if np.ndim(worse) else (x0 if worse else x)


def _broadcast(y, s, d, mu):
    y, s, d, mu = np.broadcast_arrays(
        np.asarray(y, dtype=float), np.asarray(s, dtype=complex),
        np.asarray(d, dtype=complex), np.asarray(mu, dtype=float))
    return y, s, d, mu


def _score(cands, y, se, d, eta, p):
    """True prox objective at candidate points (last axis)."""
    y, se, d, eta = y[..., None], se[..., None], d[..., None], eta[..., None]
    hp = np.abs(cands) ** 2 - y
    phm = y + np.abs(se) ** 2 - 2.0 * np.real(cands * np.conj(se))
    phi = np.where(y <= 0, hp, np.maximum(hp, phm))
    fit = phi if p == 1 else phi * phi
    return fit + eta * np.abs(cands - d) ** 2


def _select(cands, obj, tags):
    obj = np.where(np.isfinite(obj), obj, np.inf)
    k = np.argmin(obj, axis=-1)[..., None]
    u = np.take_along_axis(cands, k, axis=-1)[..., 0]
    val = np.take_along_axis(obj, k, axis=-1)[..., 0]
    tag = np.take_along_axis(np.broadcast_to(tags, cands.shape), k, axis=-1)[..., 0]
    return ProxResult(u, val, tag)


def u_update_laplace(y, s, d, mu) -> ProxResult:
    """Closed-form u-update for the Laplace fit on squared magnitudes."""
    y, s, d, mu = _broadcast(y, s, d, mu)
    eta = mu / 2.0
    se = effective_point(s, y)
    u_plus = (eta / (1.0 + eta)) * d
    u_minus = se / eta + d
    c0 = np.sqrt(2.0 * np.maximum(y + np.abs(se) ** 2, 0.0))
    u_pm = c0 * unit_phase((1.0 + eta) * se + eta * d) - se
    cands = np.stack([u_plus, u_minus, u_pm], axis=-1)
    obj = _score(cands, y, se, d, eta, 1)
    obj[..., 1:] = np.where((y <= 0)[..., None], np.inf, obj[..., 1:])
    return _select(cands, obj, np.array([U_PLUS, U_MINUS, U_PM]))


def _gaussian_plus(y, d, mu):
    """Minimizer of ``(mu/2)|u-d|^2 + (|u|^2 - y)^2``: phase of d, modulus
    among the nonnegative roots of ``4r^3 + (mu - 4y) r - mu|d|`` and 0."""
    ad = np.abs(d)
    coeffs = np.stack([np.full_like(y, 4.0), np.zeros_like(y), mu - 4.0 * y, -mu * ad], axis=-1)
    r = cubic_roots(coeffs)
    r = np.where(np.isfinite(r) & (r >= 0), r, np.nan)
    r = np.concatenate([r, np.zeros(y.shape + (1,))], axis=-1)
    val = (mu / 2.0)[..., None] * (r - ad[..., None]) ** 2 + (r * r - y[..., None]) ** 2
    val = np.where(np.isfinite(val), val, np.inf)
    k = np.argmin(val, axis=-1)[..., None]
    rbest = np.take_along_axis(r, k, axis=-1)[..., 0]
    return rbest * unit_phase(d), rbest == 0


def u_update_gaussian(y, s, d, mu) -> ProxResult:
    """Closed-form u-update for the Gaussian fit on squared magnitudes."""
    y, s, d, mu = _broadcast(y, s, d, mu)
    eta = mu / 2.0
    se = effective_point(s, y)
    u_plus, at_origin = _gaussian_plus(y, d, mu)

    # work in the frame rotated so that the expansion point is real, >= 0
    ps = unit_phase(se)
    sa = np.abs(se)
    db = d * np.conj(ps)
    yp = np.maximum(y, 0.0)
    re_u = (eta * db.real + 2.0 * sa * (yp + sa**2)) / (eta + 4.0 * sa**2)
    u_minus = (re_u + 1j * db.imag) * ps

    # equal-branch curve: the circle |u + s|^2 = 2(y + |s|^2)
    c0 = np.sqrt(2.0 * (yp + sa**2))
    c1 = c0**2 + sa**2 - yp
    r1 = 2.0 * c0 * sa
    w = 2.0 * c0 * (2.0 * c1 * sa + eta * (sa + db))
    r2, alpha = np.abs(w), np.angle(w)
    # stationarity quartic in xi = tan(theta/2), multiplied through by r1^2
    sn, cs = r2 * np.sin(alpha), r2 * np.cos(alpha)
    quart = np.stack([sn, 2.0 * cs + 4.0 * r1**2, np.zeros_like(sn), 2.0 * cs - 4.0 * r1**2, -sn], axis=-1)
    xi = quartic_roots(quart)
    theta = np.concatenate(
        [2.0 * np.arctan(xi), np.full(y.shape + (1,), np.pi), alpha[..., None]], axis=-1)
    u_pm = (c0[..., None] * np.exp(1j * theta) - sa[..., None]) * ps[..., None]
    u_pm = np.where(np.isfinite(u_pm), u_pm, np.nan)
    valid = np.abs(u_pm) ** 2 > yp[..., None] - 1e-12 * np.maximum(1.0, yp[..., None])
    u_pm = np.where(valid, u_pm, np.nan)

    cands = np.concatenate([u_plus[..., None], u_minus[..., None], u_pm], axis=-1)
    obj = _score(cands, y, se, d, eta, 2)
    obj[..., 1:] = np.where((y <= 0)[..., None], np.inf, obj[..., 1:])
    tags = np.array([U_PLUS, U_MINUS] + [U_PM] * u_pm.shape[-1])
    res = _select(cands, obj, tags)
    res.tag = np.where((res.tag == U_PLUS) & at_origin, ORIGIN, res.tag)
    return res


def u_update(model, y, s, d, mu) -> ProxResult:
    if model.q != 2:
        raise ValueError("closed-form u-updates exist only for q = 2")
    return (u_update_laplace if model.p == 1 else u_update_gaussian)(y, s, d, mu)


def project_l1_ball(x, beta: float):
    """Euclidean projection of each row of ``x`` onto ``{||x||_1 <= beta}``.

    Complex entries are shrunk in modulus with their phases kept.
    """
    x = np.asarray(x, dtype=complex)
    if beta < 0:
        raise ValueError("radius must be nonnegative")
    if beta == 0:
        return np.zeros_like(x)
    a = np.abs(x)
    total = a.sum(axis=-1, keepdims=True)
    srt = -np.sort(-a, axis=-1)
    cum = np.cumsum(srt, axis=-1)
    k = np.arange(1, a.shape[-1] + 1)
    cond = srt - (cum - beta) / k > 0
    rho = a.shape[-1] - 1 - np.argmax(cond[..., ::-1], axis=-1)
    tau = (np.take_along_axis(cum, rho[..., None], axis=-1) - beta) / (rho[..., None] + 1)
    out = unit_phase(x) * np.maximum(a - tau, 0.0)
    return np.where(total <= beta, x, out)
