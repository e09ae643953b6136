"""Data error, its convex majorizer, and the full and surrogate objectives.

All functions broadcast elementwise over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import unit_phase


@dataclass(frozen=True)
class NoiseModel:
    """``p = 1`` is the Laplace (absolute) fit, ``p = 2`` the Gaussian
    (squared) fit; ``q`` is the measured power of ``|Ax|``."""

    p: int = 1
    q: float = 2.0

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p}")
        if self.q < 1:
            raise ValueError(f"q must be >= 1, got {self.q}")

    def f(self, v):
        return v if self.p == 1 else v * v

    @property
    def name(self) -> str:
        return "laplace" if self.p == 1 else "gaussian"


LAPLACE = NoiseModel(1, 2.0)
GAUSSIAN = NoiseModel(2, 2.0)


def _y(meas):
    return np.asarray(getattr(meas, "y", meas), dtype=float)


def data_error(t, y, q=2.0):
    """``|y - |t|^q|``."""
    return np.abs(y - np.abs(t) ** q)


def tangent_surrogate(t, s, y, q=2.0):
    """Tangent plane of ``y - |t|^q`` at ``s``.

    For ``q == 1`` and ``s == 0`` the plane is the constant ``y``.
    """
    t, s, y = np.asarray(t), np.asarray(s), np.asarray(y, dtype=float)
    ms = np.abs(s)
    slope = q * ms ** (q - 1) if q != 1 else np.where(ms > 0, 1.0, 0.0)
    val = y + (q - 1) * ms**q - slope * np.real(t * np.conj(unit_phase(s)))
    return val if np.ndim(val) else float(val)


def effective_point(s, y, q=2.0):
    """Expansion point actually used by the majorizer: ``s`` itself in the
    concave region, else its projection ``y^(1/q) * phase(s)`` onto the
    circle ``|t|^q = y``."""
    s, y = np.asarray(s, dtype=complex), np.asarray(y, dtype=float)
    convex = (y > 0) & (np.abs(s) ** q >= y)
    sbar = np.where(y > 0, np.abs(y) ** (1.0 / q), 0.0) * unit_phase(s)
    return np.where(convex, sbar, s)


def majorizer_value(t, s, y, q=2.0):
    """Convex majorizer of :func:`data_error` at expansion point ``s``."""
    y = np.asarray(y, dtype=float)
    hp = np.abs(t) ** q - y
    phm = tangent_surrogate(t, effective_point(s, y, q), y, q)
    val = np.where(y <= 0, hp, np.maximum(hp, phm))
    return val if np.ndim(val) else float(val)


def objective_psi(x, meas, op, model: NoiseModel, beta: float):
    """Robust phase retrieval objective: data fit plus ``beta * ||x||_1``.

    Sums over the last axis, so a stack of signals gives one value per row.
    """
    t = op.apply(x)
    fit = model.f(data_error(t, _y(meas), model.q)).sum(axis=-1)
    return fit + beta * np.abs(x).sum(axis=-1)


def surrogate_phi(x, s, meas, op, model: NoiseModel, beta: float):
    """Convex surrogate of :func:`objective_psi` built at expansion vector ``s``."""
    t = op.apply(x)
    fit = model.f(majorizer_value(t, s, _y(meas), model.q)).sum(axis=-1)
    return fit + beta * np.abs(x).sum(axis=-1)
