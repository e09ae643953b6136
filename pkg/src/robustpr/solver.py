"""Multi-start majorize-minimize / ADMM driver.

Three nested loops:

* ``multi_init_solve`` draws several random expansion vectors ``s0`` and
  keeps the reconstruction with the lowest objective;
* ``mm_solve`` repeatedly minimizes the convex surrogate built at
  ``s = Ax`` and moves the expansion point;
* ``admm_solve`` minimizes one surrogate by splitting ``u = Ax``.

Restarts are run side by side as rows of 2D arrays: every array in a
:class:`SolverState` has a leading restart axis.  Rows stop independently.
Rows may also be independent problems: pass ``y`` with one row per problem
and a :class:`~robustpr.model.RowStackOperator`.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from .majorizer import LAPLACE, NoiseModel, data_error, majorizer_value
from .numerics import spectral_norm
from .prox import soft_threshold, u_update, x_update_fista

log = logging.getLogger(__name__)


def default_mu(model: NoiseModel, two_d: bool = False) -> float:
    if model.p == 1:
        return 1.0
    return 1.0 if two_d else 0.1


@dataclass
class SolverConfig:
    """Tuning knobs.  ``None`` tolerances resolve to ``1e-6 * sqrt(N)``
    (ADMM, on x) and ``1e-6 * sqrt(M)`` (MM, on s); ``mu=None`` picks the
    model default."""

    model: NoiseModel = LAPLACE
    beta: float = 1.0
    mu: float | None = None
    mm_iters: int = 100
    mm_tol: float | None = None
    admm_iters: int = 50
    admm_tol: float | None = None
    fista_iters: int = 25
    n_inits: int = 40
    seed: int = 0
    adaptive_mu: bool = False
    record_trace: bool = False

    def __post_init__(self):
        if min(self.mm_iters, self.admm_iters, self.fista_iters, self.n_inits) < 1:
            raise ValueError("iteration caps and n_inits must be >= 1")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.mu is not None and self.mu <= 0:
            raise ValueError("mu must be positive")
        for tol in (self.mm_tol, self.admm_tol):
            if tol is not None and tol <= 0:
                raise ValueError("tolerances must be positive")

    def resolved_mu(self, op=None) -> float:
        if self.mu is not None:
            return self.mu
        return default_mu(self.model, two_d=len(getattr(op, "shape", ())) == 2)


@dataclass
class SolverState:
    """Iterates for ``R`` restarts (leading axis of every array)."""

    x: np.ndarray
    u: np.ndarray
    b: np.ndarray
    s: np.ndarray
    mu: np.ndarray
    psi_trace: list = field(default_factory=list)
    phi_trace: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    converged: np.ndarray | None = None
    stalled: np.ndarray | None = None

    @property
    def n_restarts(self) -> int:
        return self.x.shape[0]

    def row(self, r: int) -> "SolverState":
        """Single-restart view (still 2D with one row)."""
        sl = slice(r, r + 1)
        pick = lambda a: None if a is None else a[sl]
        return SolverState(
            self.x[sl], self.u[sl], self.b[sl], self.s[sl], self.mu[sl],
            [self.psi_trace[r]], [self.phi_trace[r]], [self.trace[r]] if self.trace else [],
            pick(self.converged), pick(self.stalled))


class _Context:
    """Per-problem constants shared by all loops."""

    def __init__(self, meas, op, cfg: SolverConfig):
        self.y = np.asarray(getattr(meas, "y", meas), dtype=float)
        self.op = op
        self.cfg = cfg
        self.model = cfg.model
        self.N, self.M = op.input_dim, op.output_dim
        self.admm_tol = cfg.admm_tol if cfg.admm_tol is not None else 1e-6 * np.sqrt(self.N)
        self.mm_tol = cfg.mm_tol if cfg.mm_tol is not None else 1e-6 * np.sqrt(self.M)
        if op.left_unitary:
            self.lip = None
        elif op.right_unitary:
            self.lip = 1.0
        else:
            self.lip = 1.05 * spectral_norm(op).value ** 2

    def sub(self, rows):
        """Context restricted to a subset of rows (problem-per-row data)."""
        c = copy.copy(self)
        if hasattr(self.op, "take"):
            c.op = self.op.take(rows)
        if self.y.ndim == 2:
            c.y = self.y[rows]
        return c

    def fit(self, t, s=None):
        f = self.model.f
        if s is None:
            return f(data_error(t, self.y, self.model.q)).sum(axis=-1)
        return f(majorizer_value(t, s, self.y, self.model.q)).sum(axis=-1)

    def psi(self, x):
        return self.fit(self.op.apply(x)) + self.cfg.beta * np.abs(x).sum(axis=-1)


def _x_update(ctx: _Context, x, u, b, mu):
    beta = ctx.cfg.beta
    if ctx.lip is None:
        return soft_threshold(ctx.op.adjoint(u - b), beta / mu)
    return x_update_fista(ctx.op, u, b, beta, mu, x, ctx.cfg.fista_iters, c=mu * ctx.lip)


def adaptive_mu_update(mu, b, primal, dual, ratio: float = 10.0, factor: float = 2.0):
    """Residual balancing for the ADMM penalty.

    Returns the new ``mu`` and the correspondingly rescaled scaled dual
    ``b`` (``mu * b`` is the unscaled multiplier and must not change).
    Arrays are per restart; ``mu`` has shape (R, 1), residuals (R,).
    """
    mu = np.asarray(mu, dtype=float)
    primal = np.reshape(primal, mu.shape)
    dual = np.reshape(dual, mu.shape)
    scale = np.where(primal > ratio * dual, factor, np.where(dual > ratio * primal, 1.0 / factor, 1.0))
    return mu * scale, b / scale


def _admm(ctx: _Context, x, s, mu, u=None, b=None, tol=None, outer=0, traces=None):
    """ADMM on a block of restarts.  Returns (x, u, b, mu, converged, phi history)."""
    cfg = ctx.cfg
    tol = ctx.admm_tol if tol is None else tol
    R = x.shape[0]
    if u is None:
        u = ctx.op.apply(x)
        b = np.zeros_like(u)
    active = np.ones(R, dtype=bool)
    phi_hist = [[] for _ in range(R)]
    for it in range(cfg.admm_iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        c = ctx if idx.size == R else ctx.sub(idx)
        xa, ua, ba, ma = x[idx], u[idx], b[idx], mu[idx]
        xn = _x_update(c, xa, ua, ba, ma)
        Ax = c.op.apply(xn)
        res = u_update(c.model, c.y, s[idx], Ax + ba, ma)
        un = res.u
        bn = ba + Ax - un
        phi = c.fit(Ax, s[idx]) + cfg.beta * np.abs(xn).sum(axis=-1)
        step = np.linalg.norm(xn - xa, axis=-1)
        if cfg.adaptive_mu or cfg.record_trace:
            primal = np.linalg.norm(Ax - un, axis=-1)
            dual = ma[:, 0] * np.linalg.norm(c.op.adjoint(un - ua), axis=-1)
        if cfg.record_trace and traces is not None:
            for j, r in enumerate(idx):
                traces[r].append((outer, it + 1, np.nan, phi[j], primal[j], dual[j]))
        if cfg.adaptive_mu:
            ma, bn = adaptive_mu_update(ma, bn, primal, dual)
            mu[idx] = ma
        x[idx], u[idx], b[idx] = xn, un, bn
        for j, r in enumerate(idx):
            phi_hist[r].append(phi[j])
        if it > 0:
            # from x = 0 the first x-update returns 0 again; not a sign of convergence
            active[idx[step < tol]] = False
    return x, u, b, mu, ~active, phi_hist


def _as_rows(a):
    a = np.asarray(a, dtype=complex)
    return a[None, :] if a.ndim == 1 else a.copy()


def admm_solve(state: SolverState, meas, op, cfg: SolverConfig) -> SolverState:
    """Minimize the surrogate at ``state.s`` starting from ``state.x``.

    ``u`` and ``b`` are reset to ``Ax`` and 0.  ``phi_trace`` gets the
    surrogate value after every iteration.
    """
    ctx = _Context(meas, op, cfg)
    x = _as_rows(state.x)
    s = _as_rows(state.s)
    mu = np.array(state.mu, dtype=float).reshape(-1, 1) * np.ones((x.shape[0], 1))
    x, u, b, mu, conv, phi = _admm(ctx, x, s, mu)
    return SolverState(x, u, b, s, mu, [list(t) for t in state.psi_trace] or [[] for _ in x],
                       phi, converged=conv)


def draw_initial_s(meas, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. circular complex Gaussian expansion vectors with
    ``E|s_m|^2 = mean(y)``."""
    y = np.asarray(getattr(meas, "y", meas), dtype=float)
    rng = np.random.default_rng(seed)
    energy = max(float(np.mean(y)), 1e-12)
    z = rng.standard_normal((n, len(y))) + 1j * rng.standard_normal((n, len(y)))
    return np.sqrt(energy / 2.0) * z


def mm_solve(meas, op, cfg: SolverConfig, s0=None, x0=None) -> SolverState:
    """Majorize-minimize from expansion vector(s) ``s0``.

    ``s0`` may be 1D (one run) or 2D (one row per restart); by default a
    single vector is drawn with ``cfg.seed``.  ``x0`` defaults to zero.
    With one row of ``y`` per problem, ``s0`` must be given.

    An outer step that raises the objective is retried once by continuing
    ADMM with half the tolerance; if it still does not descend, the row
    keeps its previous iterate and stops (``stalled``).
    """
    ctx = _Context(meas, op, cfg)
    if s0 is None and ctx.y.ndim == 2:
        raise ValueError("s0 is required when y holds one problem per row")
    s = _as_rows(draw_initial_s(meas, 1, cfg.seed) if s0 is None else s0)
    R = s.shape[0]
    x = np.zeros((R, ctx.N), dtype=complex) if x0 is None else _as_rows(x0) * np.ones((R, 1))
    mu = np.full((R, 1), cfg.resolved_mu(op))
    u = op.apply(x)
    b = np.zeros_like(u)
    psi_tr = [[] for _ in range(R)]
    phi_tr = [[] for _ in range(R)]
    traces = [[] for _ in range(R)]
    psi = np.full(R, np.inf)
    active = np.ones(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    stalled = np.zeros(R, dtype=bool)

    for outer in range(1, cfg.mm_iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        c = ctx if idx.size == R else ctx.sub(idx)
        sa, ma = s[idx], mu[idx].copy()
        xa, ua, ba, ma, _, phi = _admm(c, x[idx].copy(), sa, ma, outer=outer,
                                       traces=[traces[r] for r in idx])
        psi_new = c.psi(xa)
        if outer > 1:
            # surrogate is tight at the previous x only from the second pass on
            bad = psi_new > psi[idx]
            if np.any(bad):
                bi = np.flatnonzero(bad)
                cb = c.sub(bi)
                xr, ur, br, mr, _, phr = _admm(
                    cb, xa[bi], sa[bi], ma[bi], u=ua[bi], b=ba[bi],
                    tol=ctx.admm_tol / 2, outer=outer, traces=[traces[idx[k]] for k in bi])
                xa[bi], ua[bi], ba[bi], ma[bi] = xr, ur, br, mr
                psi_new[bi] = cb.psi(xr)
                for j, k in enumerate(bi):
                    phi[k] = phi[k] + phr[j]
                still = psi_new > psi[idx]
                keep = np.flatnonzero(still)
                xa[keep] = x[idx[keep]]
                ua[keep], ba[keep] = u[idx[keep]], b[idx[keep]]
                psi_new[keep] = psi[idx[keep]]
                stalled[idx[keep]] = True
        x[idx], u[idx], b[idx], mu[idx] = xa, ua, ba, ma
        psi[idx] = psi_new
        s_new = c.op.apply(xa)
        moved = np.linalg.norm(s_new - sa, axis=-1)
        s[idx] = s_new
        for j, r in enumerate(idx):
            psi_tr[r].append(float(psi_new[j]))
            phi_tr[r].extend(phi[j])
            if cfg.record_trace:
                traces[r].append((outer, 0, float(psi_new[j]), np.nan, np.nan, np.nan))
        done = moved < ctx.mm_tol
        converged[idx[done]] = True
        active[idx[done | stalled[idx]]] = False

    return SolverState(x, u, b, s, mu, psi_tr, phi_tr, traces if cfg.record_trace else [],
                       converged, stalled)


@dataclass
class MultiInitResult:
    best: SolverState
    psi: np.ndarray
    best_index: int
    all_states: SolverState

    @property
    def x(self) -> np.ndarray:
        return self.best.x[0]


def multi_init_solve(meas, op, cfg: SolverConfig) -> MultiInitResult:
    """Run ``cfg.n_inits`` restarts from random ``s0`` and keep the one with
    the lowest final objective."""
    s0 = draw_initial_s(meas, cfg.n_inits, cfg.seed)
    st = mm_solve(meas, op, cfg, s0=s0)
    psi = np.array([t[-1] if t else np.inf for t in st.psi_trace])
    k = int(np.argmin(psi))
    return MultiInitResult(st.row(k), psi, k, st)


def write_trace_csv(path, state: SolverState, restart: int = 0) -> None:
    """Dump the per-iteration trace recorded with ``record_trace=True``."""
    import csv
    from .model import FLOAT_FMT

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outer_iter", "inner_iter", "psi", "phi", "primal_res", "dual_res"])
        for row in state.trace[restart]:
            w.writerow([row[0], row[1]] + [FLOAT_FMT.format(v) for v in row[2:]])
