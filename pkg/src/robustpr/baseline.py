"""L1-Fienup: alternating projections with an L1-ball image constraint.

Each iteration imposes the measured Fourier magnitudes (unmeasured
frequencies pass through unchanged) and then projects the image onto
``{||x||_1 <= beta}``.  Restarts run side by side as rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prox import project_l1_ball, unit_phase


@dataclass
class FienupConfig:
    beta: float = 2.0
    iters: int = 500
    n_inits: int = 40
    seed: int = 0
    tol: float = 1e-8

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("L1 radius must be positive")
        if self.iters < 1 or self.n_inits < 1:
            raise ValueError("iters and n_inits must be >= 1")


@dataclass
class FienupResult:
    x: np.ndarray
    discrepancy: np.ndarray
    best_index: int
    all_x: np.ndarray
    iterations: np.ndarray


def magnitude_projection(spectrum, mask, magnitudes):
    """Replace the modulus of the measured entries, keep their phases."""
    out = np.array(spectrum, dtype=complex, copy=True)
    out[..., mask] = magnitudes * unit_phase(out[..., mask])
    return out


def data_discrepancy(x, meas, op):
    """``sum_m | |[Ax]_m|^2 - y_m |`` per row."""
    return np.abs(np.abs(op.apply(x)) ** 2 - meas.y).sum(axis=-1)


def l1_fienup(meas, op, cfg: FienupConfig, x0=None) -> FienupResult:
    """Run ``cfg.n_inits`` L1-Fienup restarts and keep the most data-consistent.

    Restarts begin from the measured magnitudes with uniform random phases
    (zero on unmeasured frequencies), unless ``x0`` (one row per restart)
    is given.
    """
    if not hasattr(op, "apply_full"):
        raise TypeError("L1-Fienup needs a masked DFT operator")
    if meas.q != 2:
        raise ValueError("L1-Fienup expects squared-magnitude data")
    mag = np.sqrt(np.maximum(meas.y, 0.0))
    mask = op.mask
    if x0 is None:
        rng = np.random.default_rng(cfg.seed)
        spec = np.zeros((cfg.n_inits, op.n_freq), dtype=complex)
        spec[:, mask] = mag * np.exp(2j * np.pi * rng.random((cfg.n_inits, len(mask))))
        x = project_l1_ball(op.inverse_full(spec), cfg.beta)
    else:
        x = np.atleast_2d(np.asarray(x0, dtype=complex)).copy()
    R = x.shape[0]
    active = np.ones(R, dtype=bool)
    n_it = np.zeros(R, dtype=int)
    for _ in range(cfg.iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa = x[idx]
        spec = magnitude_projection(op.apply_full(xa), mask, mag)
        xn = project_l1_ball(op.inverse_full(spec), cfg.beta)
        x[idx] = xn
        n_it[idx] += 1
        active[idx[np.linalg.norm(xn - xa, axis=-1) < cfg.tol]] = False
    disc = data_discrepancy(x, meas, op)
    k = int(np.argmin(disc))
    return FienupResult(x[k].copy(), disc, k, x, n_it)
