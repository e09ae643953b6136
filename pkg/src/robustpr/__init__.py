"""Sparse phase retrieval robust to measurement outliers.

Majorize-minimize reconstruction with an ADMM inner solver, for Laplace
(``p = 1``) or Gaussian (``p = 2``) data-fit models, an L1-ball Fienup
baseline, and an ambiguity-aware evaluation toolkit.
"""

from .baseline import FienupConfig, FienupResult, l1_fienup
from .evalkit import EvalReport, align_candidate, detect_support, evaluate
from .majorizer import GAUSSIAN, LAPLACE, NoiseModel, objective_psi, surrogate_phi
from .model import (
    MaskedDFT,
    MeasurementSet,
    RowStackOperator,
    SparseSignal,
    generate_sparse_signal,
    inject_outliers,
    random_mask,
    simulate_measurements,
)
from .solver import SolverConfig, admm_solve, mm_solve, multi_init_solve

__version__ = "0.1.0"

__all__ = [
    "FienupConfig", "FienupResult", "l1_fienup",
    "EvalReport", "align_candidate", "detect_support", "evaluate",
    "GAUSSIAN", "LAPLACE", "NoiseModel", "objective_psi", "surrogate_phi",
    "MaskedDFT", "MeasurementSet", "RowStackOperator", "SparseSignal", "generate_sparse_signal",
    "inject_outliers", "random_mask", "simulate_measurements",
    "SolverConfig", "admm_solve", "mm_solve", "multi_init_solve",
]
