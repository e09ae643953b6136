"""Ambiguity-aware scoring of reconstructions.

A Fourier magnitude cannot distinguish a signal from its circular shifts,
its conjugate reflection or a global phase rotation.  Before scoring, the
estimate is aligned to the truth over circular shifts, the four
reflection variants (identity, reversal, conjugation, conjugate reversal)
and a global phase.  Including all four variants makes the candidate set
a group, so scoring is invariant to any of these transformations applied
to the estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import unit_phase


@dataclass(frozen=True)
class Alignment:
    aligned: np.ndarray
    shift: tuple
    reversed: bool
    conjugated: bool
    global_phase: complex


@dataclass(frozen=True)
class EvalReport:
    correct: bool
    mse: float
    psnr_db: float
    shift: tuple
    reversed: bool
    conjugated: bool
    global_phase: complex
    f1: float


def reverse(x, shape=None):
    """Index reversal modulo the grid size: ``x[n] -> x[(-n) mod N]`` (per axis)."""
    x = np.asarray(x)
    grid = x.reshape(shape) if shape is not None else x
    axes = tuple(range(grid.ndim))
    out = np.roll(np.flip(grid, axes), 1, axes)
    return out.reshape(x.shape)


def _shift(x, k, shape):
    grid = x.reshape(shape)
    return np.roll(grid, tuple(-np.asarray(k)), tuple(range(grid.ndim))).reshape(x.shape)


def align_candidate(x_hat, x_true, shape=None) -> Alignment:
    """Best circular shift / reflection / global phase of ``x_hat`` onto ``x_true``.

    ``shape`` is the grid shape for columnized images (default: 1D).
    The reported ``shift`` is the displacement present in the (reflected)
    estimate, i.e. ``aligned = phase * roll(variant, -shift)``.
    """
    x_hat = np.asarray(x_hat, dtype=complex).ravel()
    x_true = np.asarray(x_true, dtype=complex).ravel()
    if x_hat.shape != x_true.shape:
        raise ValueError("estimate and truth must have the same length")
    shape = (len(x_true),) if shape is None else tuple(shape)
    zero = (0,) * len(shape)
    if not np.any(x_true):
        return Alignment(x_hat, zero, False, False, 1 + 0j)

    XT = np.conj(np.fft.fftn(x_true.reshape(shape)))
    best = None
    for rev in (False, True):
        for conj in (False, True):
            v = reverse(x_hat, shape) if rev else x_hat
            v = np.conj(v) if conj else v
            corr = np.fft.ifftn(XT * np.fft.fftn(v.reshape(shape)))
            k = np.unravel_index(np.argmax(np.abs(corr)), corr.shape)
            score = np.abs(corr[k])
            if best is None or score > best[0] * (1 + 1e-12):
                best = (score, v, tuple(int(i) for i in k), rev, conj, corr[k])
    _, v, k, rev, conj, c = best
    phase = complex(np.conj(unit_phase(c)))
    return Alignment(phase * _shift(v, k, shape), k, rev, conj, phase)


def detect_support(x, threshold: float = 0.05) -> np.ndarray:
    """Indices (0-based, flat) where ``|x| > threshold``."""
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    return np.flatnonzero(np.abs(np.asarray(x).ravel()) > threshold)


def support_f1(found, true) -> float:
    found, true = set(np.asarray(found).tolist()), set(np.asarray(true).tolist())
    if not found and not true:
        return 1.0
    tp = len(found & true)
    return 2.0 * tp / (len(found) + len(true))


def psnr(mse: float) -> float:
    """PSNR in dB for unit peak amplitude; ``inf`` for a perfect match."""
    return float("inf") if mse <= 0 else float(10.0 * np.log10(1.0 / mse))


def evaluate(x_hat, x_true, threshold: float = 0.05, shape=None) -> EvalReport:
    """Align, then score support recovery (exact match), MSE and PSNR."""
    al = align_candidate(x_hat, x_true, shape)
    xt = np.asarray(x_true, dtype=complex).ravel()
    found = detect_support(al.aligned, threshold)
    true = np.flatnonzero(xt)
    mse = float(np.mean(np.abs(al.aligned - xt) ** 2))
    return EvalReport(
        correct=bool(np.array_equal(found, true)),
        mse=mse,
        psnr_db=psnr(mse),
        shift=al.shift,
        reversed=al.reversed,
        conjugated=al.conjugated,
        global_phase=al.global_phase,
        f1=support_f1(found, true),
    )
