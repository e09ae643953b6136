"""Experiment driver: Monte Carlo grids, beta/mu sweeps, beta calibration and
2D image reconstruction, with plot-ready CSV output.

Every experiment is described by an :class:`ExperimentSpec`, usually read
from a JSON file.  Data for trial ``t`` of a cell ``(K, M, outliers)`` come
from a generator keyed on ``(master_seed, t, K, M, outliers)``, so every
method sees byte-identical measurements and results do not depend on the
order (or parallelism) in which trials run.

Command line::

    robustpr montecarlo --spec grid.json --out results/
    robustpr calibrate-beta --spec calib.json --out calib/
    robustpr image2d --spec image.json --out img/
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baseline import FienupConfig, l1_fienup
from .evalkit import align_candidate, evaluate
from .majorizer import GAUSSIAN, LAPLACE
from .model import (
    FLOAT_FMT,
    MaskedDFT,
    dot_phantom,
    generate_sparse_signal,
    inject_outliers,
    random_mask,
    read_pgm,
    simulate_measurements,
    write_pgm,
)
from .solver import SolverConfig, SolverState, admm_solve, draw_initial_s, mm_solve, multi_init_solve

log = logging.getLogger(__name__)

METHODS = ("laplace", "gaussian", "l1fienup")
KINDS = ("montecarlo", "sweep_beta", "sweep_mu", "image2d", "calibrate_beta")
DEFAULT_INITS = {"laplace": 40, "gaussian": 50, "l1fienup": 40}
# 2D problems are ~30x larger; a couple of restarts already suffice there
DEFAULT_INITS_2D = {"laplace": 2, "gaussian": 2, "l1fienup": 10}
DEFAULT_THRESHOLD = {"laplace": 0.05, "gaussian": 0.2, "l1fienup": 0.05}
PSNR_CLAMP_DB = 100.0

TRIAL_COLUMNS = [
    "method", "K", "M", "n_outliers", "trial", "beta", "correct", "mse", "psnr_db",
    "f1", "shift", "reversed", "conjugated", "objective", "runtime_s",
]
AGGREGATE_COLUMNS = [
    "method", "K", "M", "n_outliers", "beta", "n_trials", "correct_rate",
    "mean_psnr_db", "mean_mse",
]


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ExperimentSpec:
    """Description of one experiment.

    ``method_config`` maps a method name to keyword overrides for its
    :class:`SolverConfig` / :class:`FienupConfig` (e.g. ``{"mu": 1.0}``);
    a ``beta`` given there wins over the beta table.  ``betas`` holds the
    per-method grids for sweeps and calibration, ``mus`` the mu grid.
    ``calibration_outliers`` is the outlier count used by calibrate-beta.
    """

    kind: str = "montecarlo"
    N: int = 128
    K: list = field(default_factory=lambda: [3])
    M: list = field(default_factory=lambda: [128])
    n_outliers: list = field(default_factory=lambda: [0])
    n_trials: int = 50
    methods: list = field(default_factory=lambda: list(METHODS))
    method_config: dict = field(default_factory=dict)
    beta_table: str | None = None
    beta_scaling: str = "none"
    betas: dict = field(default_factory=dict)
    mus: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    thresholds: dict = field(default_factory=dict)
    master_seed: int = 0
    output_dir: str = "out"
    image: str | None = None
    image_size: int = 64
    image_fraction: float = 0.5
    domain: str = "1d"
    calibration_outliers: int = 0
    trace_admm_iters: int = 200

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        self.K = [int(k) for k in _as_list(self.K)]
        self.M = [int(m) for m in _as_list(self.M)]
        self.n_outliers = [int(o) for o in _as_list(self.n_outliers)]
        self.methods = _as_list(self.methods)
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; expected a subset of {METHODS}")
        if not 0.0 < self.image_fraction <= 1.0:
            raise ValueError("image_fraction must lie in (0, 1]")
        if self.calibration_outliers < 0:
            raise ValueError("calibration_outliers must be >= 0")
        if self.domain not in ("1d", "2d"):
            raise ValueError("domain must be '1d' or '2d'")
        if self.beta_scaling not in ("none", "linear_m"):
            raise ValueError("beta_scaling must be 'none' or 'linear_m'")
        if any(m > self.N for m in self.M) and self.kind != "image2d" and self.domain == "1d":
            raise ValueError("M cannot exceed N")
        for name in self.method_config:
            if name not in METHODS:
                raise ValueError(f"config given for unknown method {name!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown spec keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def threshold(self, method: str) -> float:
        return float(self.thresholds.get(method, DEFAULT_THRESHOLD[method]))


# -- beta tables --------------------------------------------------------------

class BetaTable:
    """Regularization (or L1 radius) per ``(method, K, M, n_outliers)``.

    Keys may omit ``n_outliers``, meaning 0.  A lookup for an outlier count
    without its own entry falls back to the zero-outlier entry.  With
    ``scaling="linear_m"`` a missing ``M`` is filled by linear
    interpolation in ``M`` between tabulated entries of the same
    ``(method, K, n_outliers)``; with a single entry, beta is scaled
    proportionally.
    """

    def __init__(self, entries=None):
        self.entries = {}
        for key, b in dict(entries or {}).items():
            self.set(*key, beta=b)

    @classmethod
    def read_csv(cls, path) -> "BetaTable":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls({(r["method"], int(r["K"]), int(r["M"]), int(r.get("n_outliers") or 0)): float(r["beta"])
                    for r in rows})

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["method", "K", "M", "n_outliers", "beta"])
            for (meth, K, M, o), b in sorted(self.entries.items()):
                w.writerow([meth, K, M, o, FLOAT_FMT.format(b)])

    def _lookup(self, method, K, M, n_out, scaling):
        key = (method, int(K), int(M), int(n_out))
        if key in self.entries:
            return self.entries[key]
        if scaling == "linear_m":
            pts = sorted((m, b) for (me, k, m, o), b in self.entries.items()
                         if me == method and k == K and o == n_out)
            if len(pts) == 1:
                return pts[0][1] * M / pts[0][0]
            if pts:
                ms, bs = zip(*pts)
                if ms[0] <= M <= ms[-1]:
                    return float(np.interp(M, ms, bs))
                # extrapolate from the nearest pair
                (m0, b0), (m1, b1) = (pts[0], pts[1]) if M < ms[0] else (pts[-2], pts[-1])
                return max(b0 + (b1 - b0) * (M - m0) / (m1 - m0), 1e-12)
        return None

    def lookup(self, method: str, K: int, M: int, scaling: str = "none", n_outliers: int = 0) -> float:
        for o in dict.fromkeys((int(n_outliers), 0)):
            b = self._lookup(method, K, M, o, scaling)
            if b is not None:
                return b
        raise KeyError(f"no beta for method={method}, K={K}, M={M}")

    def set(self, method: str, K: int, M: int, n_outliers: int = 0, *, beta: float) -> None:
        self.entries[(method, int(K), int(M), int(n_outliers))] = float(beta)


def default_beta_table_path() -> Path:
    return Path(__file__).with_name("data") / "beta_table.csv"


def load_beta_table(spec: ExperimentSpec) -> BetaTable:
    path = spec.beta_table or default_beta_table_path()
    return BetaTable.read_csv(path) if Path(path).exists() else BetaTable()


def resolve_beta(spec: ExperimentSpec, table: BetaTable, method: str, K: int, M: int,
                 n_out: int = 0) -> float:
    over = spec.method_config.get(method, {})
    if "beta" in over:
        return float(over["beta"])
    try:
        return table.lookup(method, K, M, spec.beta_scaling, n_out)
    except KeyError as exc:
        raise KeyError(f"missing beta for cell (method={method}, K={K}, M={M}); "
                       "add it to the beta table or run calibrate-beta") from exc


def check_betas(spec: ExperimentSpec, table: BetaTable, cells) -> None:
    missing = []
    for meth in spec.methods:
        for K, M, o in cells:
            try:
                resolve_beta(spec, table, meth, K, M, o)
            except KeyError:
                missing.append((meth, K, M))
    if missing:
        raise KeyError("missing beta for cells: " + ", ".join(
            f"(method={a}, K={b}, M={c})" for a, b, c in sorted(set(missing))))


# -- trial data and method dispatch --------------------------------------------

def cell_rng(master_seed: int, trial: int, K: int, M: int, n_out: int, stream: int = 0):
    return np.random.default_rng([int(master_seed), int(trial), int(K), int(M), int(n_out), int(stream)])


def child_seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1)[0])


def make_trial(spec: ExperimentSpec, K: int, M: int, n_out: int, trial: int):
    """Signal, operator and (corrupted) measurements for one trial."""
    rng = cell_rng(spec.master_seed, trial, K, M, n_out)
    sig = generate_sparse_signal(spec.N, K, rng)
    op = MaskedDFT(spec.N, random_mask(spec.N, M, rng))
    meas = inject_outliers(simulate_measurements(sig, op), n_out, rng)
    return sig, op, meas


def _overrides(spec: ExperimentSpec, method: str, two_d: bool = False) -> dict:
    over = {k: v for k, v in spec.method_config.get(method, {}).items() if k != "beta"}
    over.setdefault("n_inits", (DEFAULT_INITS_2D if two_d else DEFAULT_INITS)[method])
    return over


def solver_config(spec: ExperimentSpec, method: str, beta: float, seed: int, two_d: bool = False,
                  **extra) -> SolverConfig:
    over = _overrides(spec, method, two_d)
    over.update(extra)
    model = LAPLACE if method == "laplace" else GAUSSIAN
    return SolverConfig(model=model, beta=beta, seed=seed, **over)


def run_method(spec: ExperimentSpec, method: str, meas, op, beta: float, seed: int):
    """Reconstruct with one method; returns ``(x_hat, objective)``."""
    two_d = len(op.shape) == 2
    if method == "l1fienup":
        res = l1_fienup(meas, op, FienupConfig(beta=beta, seed=seed, **_overrides(spec, method, two_d)))
        return res.x, float(res.discrepancy[res.best_index])
    res = multi_init_solve(meas, op, solver_config(spec, method, beta, seed, two_d))
    return res.x, float(res.psi[res.best_index])


def _method_index(method: str) -> int:
    return METHODS.index(method) + 1


def _run_trial(args):
    spec, method, K, M, n_out, trial, beta = args
    sig, op, meas = make_trial(spec, K, M, n_out, trial)
    seed = child_seed(spec.master_seed, trial, K, M, n_out, _method_index(method))
    t0 = time.perf_counter()
    x_hat, obj = run_method(spec, method, meas, op, beta, seed)
    dt = time.perf_counter() - t0
    rep = evaluate(x_hat, sig.values, spec.threshold(method))
    return {
        "method": method, "K": K, "M": M, "n_outliers": n_out, "trial": trial, "beta": beta,
        "correct": int(rep.correct), "mse": rep.mse, "psnr_db": rep.psnr_db, "f1": rep.f1,
        "shift": rep.shift[0], "reversed": int(rep.reversed), "conjugated": int(rep.conjugated),
        "objective": obj, "runtime_s": dt,
    }


def _map(fn, jobs, threads: int):
    if threads <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, jobs))


# -- aggregation and output ----------------------------------------------------

def clamp_psnr(v: float) -> float:
    return min(float(v), PSNR_CLAMP_DB)


def aggregate(rows) -> list[dict]:
    """Per (method, K, M, outliers, beta): correctness rate, mean clamped
    PSNR and mean MSE.  Order-independent."""
    groups: dict = {}
    for r in rows:
        key = (r["method"], r["K"], r["M"], r["n_outliers"], r["beta"])
        groups.setdefault(key, []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: (METHODS.index(k[0]), *k[1:])):
        g = groups[key]
        out.append({
            "method": key[0], "K": key[1], "M": key[2], "n_outliers": key[3], "beta": key[4],
            "n_trials": len(g),
            "correct_rate": sum(int(r["correct"]) for r in g) / len(g),
            "mean_psnr_db": float(np.mean([clamp_psnr(r["psnr_db"]) for r in g])),
            "mean_mse": float(np.mean([r["mse"] for r in g])),
        })
    return out


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT.format(float(v))
    return v


def write_rows(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_manifest(out: Path, spec: ExperimentSpec, files, extra=None) -> None:
    man = {
        "package_version": __version__,
        "spec": asdict(spec),
        "master_seed": spec.master_seed,
        "psnr_clamp_db": PSNR_CLAMP_DB,
        "psnr_note": "infinite PSNR (exact recovery) is clamped to psnr_clamp_db before averaging",
        "seeding": "trial data: default_rng([master_seed, trial, K, M, n_outliers, 0]); "
                   "restarts: SeedSequence([master_seed, trial, K, M, n_outliers, method_index])",
        "python": platform.python_version(),
        "numpy": np.__version__,
        "files": sorted(files),
        "created_unix": time.time(),
    }
    if extra:
        man.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(man, fh, indent=2, default=str)


def _cells(spec: ExperimentSpec):
    return [(K, M, o) for K in spec.K for M in spec.M for o in spec.n_outliers]


# -- experiments ---------------------------------------------------------------

def run_montecarlo(spec: ExperimentSpec, threads: int = 1, out: Path | None = None, table=None):
    """All methods over the (K, M, outliers) grid with tabulated betas."""
    table = load_beta_table(spec) if table is None else table
    cells = _cells(spec)
    check_betas(spec, table, cells)
    jobs = [(spec, meth, K, M, o, t, resolve_beta(spec, table, meth, K, M, o))
            for (K, M, o) in cells for meth in spec.methods for t in range(spec.n_trials)]
    rows = _finish(_map(_run_trial, jobs, threads))
    if out is not None:
        _write_tables(out, spec, rows)
    return rows


def run_sweep_beta(spec: ExperimentSpec, threads: int = 1, out: Path | None = None):
    """Correctness versus beta for every method and (K, M, outliers) cell."""
    jobs = []
    for meth in spec.methods:
        grid = spec.betas.get(meth)
        if not grid:
            raise KeyError(f"no beta grid for method {meth}")
        for (K, M, o) in _cells(spec):
            for b in grid:
                jobs += [(spec, meth, K, M, o, t, float(b)) for t in range(spec.n_trials)]
    rows = _finish(_map(_run_trial, jobs, threads))
    if out is not None:
        _write_tables(out, spec, rows)
    return rows


def pick_betas(agg_rows) -> BetaTable:
    """Best beta per (method, K, M, n_outliers): highest correctness, then
    highest mean PSNR, then the smaller beta."""
    best: dict = {}
    for r in agg_rows:
        key = (r["method"], int(r["K"]), int(r["M"]), int(r["n_outliers"]))
        score = (float(r["correct_rate"]), float(r["mean_psnr_db"]), -float(r["beta"]))
        if key not in best or score > best[key][0]:
            best[key] = (score, float(r["beta"]))
    return BetaTable({k: v[1] for k, v in best.items()})


def run_calibrate_beta(spec: ExperimentSpec, threads: int = 1, out: Path | None = None) -> BetaTable:
    """Beta sweep at ``calibration_outliers`` outliers (default 0); writes
    ``beta_table.csv`` keyed by that outlier count.

    With ``domain="2d"`` the sweep runs on the experiment's image (see
    :func:`run_sweep_beta_image`) and the table is keyed by its pixel
    support size and ``M``.

    Calibration data use their own stream (``master_seed`` offset by
    ``10**6``), so a table calibrated with the same master seed does not
    see the evaluation trials.
    """
    cal = ExperimentSpec.from_dict({**asdict(spec), "n_outliers": [spec.calibration_outliers], "kind": "sweep_beta",
                                    "master_seed": spec.master_seed + 10**6})
    rows = run_sweep_beta_image(cal, threads) if spec.domain == "2d" else run_sweep_beta(cal, threads)
    table = pick_betas(aggregate(rows))
    if out is not None:
        _write_tables(out, cal, rows, extra_files=["beta_table.csv"])
        table.write_csv(out / "beta_table.csv")
    return table


def _finish(rows):
    return sorted(rows, key=lambda r: (METHODS.index(r["method"]), r["K"], r["M"],
                                       r["n_outliers"], r["beta"], r["trial"]))


def _write_tables(out: Path, spec, rows, extra_files=()):
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "trials.csv", rows, TRIAL_COLUMNS)
    write_rows(out / "aggregate.csv", aggregate(rows), AGGREGATE_COLUMNS)
    write_manifest(out, spec, ["trials.csv", "aggregate.csv", *extra_files])


def _admm_runs(trace):
    runs: dict = {}
    for outer, inner, _, phi, _, _ in trace:
        if inner > 0:
            runs.setdefault(outer, []).append((inner, phi))
    return runs


def run_sweep_mu(spec: ExperimentSpec, out: Path | None = None) -> list[dict]:
    """Surrogate convergence of the first and next-to-last ADMM runs for each mu.

    One trial (index 0) of the first (K, M, outliers) cell with a single
    restart.  ``phi_star`` is the lowest surrogate value seen when the same
    ADMM run is continued for ``trace_admm_iters`` iterations.
    """
    table = load_beta_table(spec)
    K, M, n_out = _cells(spec)[0]
    sig, op, meas = make_trial(spec, K, M, n_out, 0)
    rows = []
    for meth in [m for m in spec.methods if m != "l1fienup"]:
        beta = resolve_beta(spec, table, meth, K, M, n_out)
        seed = child_seed(spec.master_seed, 0, K, M, n_out, _method_index(meth))
        for mu in spec.mus:
            cfg = solver_config(spec, meth, beta, seed, mu=float(mu), n_inits=1, record_trace=True)
            st = mm_solve(meas, op, cfg)
            runs = _admm_runs(st.trace[0])
            last = max(runs)
            picks = [("first", 1)] + ([("next_to_last", last - 1)] if last > 1 else [])
            for label, k in picks:
                # state at the start of outer iteration k
                if k == 1:
                    x0 = np.zeros((1, op.input_dim), dtype=complex)
                    s0 = draw_initial_s(meas, 1, cfg.seed)
                else:
                    prev = mm_solve(meas, op, replace(cfg, mm_iters=k - 1))
                    x0, s0 = prev.x, prev.s
                long_cfg = replace(cfg, admm_iters=spec.trace_admm_iters, admm_tol=1e-300,
                                   record_trace=False)
                ref = admm_solve(SolverState(x0, op.apply(x0), np.zeros((1, op.output_dim), complex),
                                             s0, np.array([[float(mu)]])), meas, op, long_cfg)
                phis = [p for _, p in runs[k]]
                star = min(min(ref.phi_trace[0]), min(phis))
                for i, p in runs[k]:
                    rows.append({"method": meth, "mu": float(mu), "run": label, "outer_iter": k,
                                 "inner_iter": i, "phi": p, "phi_minus_star": p - star})
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_rows(out / "trace.csv", rows,
                   ["method", "mu", "run", "outer_iter", "inner_iter", "phi", "phi_minus_star"])
        write_manifest(out, spec, ["trace.csv"], {"sweep_mu_cell": {"K": K, "M": M, "n_outliers": n_out}})
    return rows


def load_image(spec: ExperimentSpec) -> tuple[np.ndarray, float]:
    """Input image scaled to unit peak, and the scale used."""
    img = dot_phantom(spec.image_size) if spec.image is None else read_pgm(spec.image)
    peak = float(np.max(np.abs(img)))
    return (img / peak if peak > 0 else img.astype(float)), (peak if peak > 0 else 1.0)


def image_problem(spec: ExperimentSpec, trial: int, n_out: int):
    """Image, mask and (corrupted) measurements for one 2D trial.

    ``M`` is ``image_fraction`` of the pixel count (rounded, at least 1);
    ``K`` is the number of nonzero pixels.
    """
    img, peak = load_image(spec)
    n = img.size
    M = max(1, int(round(spec.image_fraction * n)))
    K = int(np.count_nonzero(img))
    rng = cell_rng(spec.master_seed, trial, K, M, n_out)
    op = MaskedDFT(img.shape, random_mask(n, M, rng))
    truth = img.astype(complex).ravel()
    meas = inject_outliers(simulate_measurements(truth, op), n_out, rng)
    return img, peak, truth, op, meas, K, M


def _run_image_trial(args):
    spec, meth, n_out, trial, beta = args
    img, _, truth, op, meas, K, M = image_problem(spec, trial, n_out)
    seed = child_seed(spec.master_seed, trial, K, M, n_out, _method_index(meth))
    t0 = time.perf_counter()
    x_hat, obj = run_method(spec, meth, meas, op, beta, seed)
    dt = time.perf_counter() - t0
    rep = evaluate(x_hat, truth, spec.threshold(meth), shape=img.shape)
    row = {
        "method": meth, "K": K, "M": M, "n_outliers": n_out, "trial": trial, "beta": beta,
        "correct": int(rep.correct), "mse": rep.mse, "psnr_db": rep.psnr_db, "f1": rep.f1,
        "shift": "x".join(str(s) for s in rep.shift), "reversed": int(rep.reversed),
        "conjugated": int(rep.conjugated), "objective": obj, "runtime_s": dt,
    }
    return row, x_hat


def run_sweep_beta_image(spec: ExperimentSpec, threads: int = 1, out: Path | None = None):
    """Beta sweep on the experiment's image; trials differ in mask and restarts."""
    jobs = []
    for meth in spec.methods:
        grid = spec.betas.get(meth)
        if not grid:
            raise KeyError(f"no beta grid for method {meth}")
        for o in spec.n_outliers:
            for b in grid:
                jobs += [(spec, meth, o, t, float(b)) for t in range(spec.n_trials)]
    rows = _finish([r for r, _ in _map(_run_image_trial, jobs, threads)])
    if out is not None:
        _write_tables(out, spec, rows)
    return rows


def run_image2d(spec: ExperimentSpec, out: Path | None = None) -> list[dict]:
    """Undersampled 2D reconstruction of a PGM image (or the built-in dot
    phantom) with every requested method.

    Problem setup follows :func:`image_problem` (trial 0, first entry of
    ``n_outliers``).
    """
    n_out = spec.n_outliers[0]
    img, peak, truth, op, meas, K, M = image_problem(spec, 0, n_out)
    shape = img.shape
    table = load_beta_table(spec)
    rows = []
    images = {}
    for meth in spec.methods:
        beta = resolve_beta(spec, table, meth, K, M, n_out)
        row, x_hat = _run_image_trial((spec, meth, n_out, 0, beta))
        images[meth] = np.abs(align_candidate(x_hat, truth, shape).aligned).reshape(shape)
        rows.append(row)
        log.info("%s: psnr %.2f dB, f1 %.3f, %.1f s", meth, row["psnr_db"], row["f1"], row["runtime_s"])
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        files = ["trials.csv", "truth.pgm"]
        write_rows(out / "trials.csv", rows, TRIAL_COLUMNS)
        maxval = 255 if peak <= 255 else 65535
        scale = min(peak, maxval)
        write_pgm(out / "truth.pgm", img * scale, maxval)
        for meth, im in images.items():
            write_pgm(out / f"recon_{meth}.pgm", im * scale, maxval)
            files.append(f"recon_{meth}.pgm")
        write_manifest(out, spec, files, {"image_shape": list(shape), "M": M, "K": K})
    return rows


# -- command line --------------------------------------------------------------

COMMANDS = {
    "montecarlo": "montecarlo",
    "sweep-beta": "sweep_beta",
    "sweep-mu": "sweep_mu",
    "image2d": "image2d",
    "calibrate-beta": "calibrate_beta",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robustpr", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", type=Path, help="experiment spec (JSON)")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes for trials")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    kind = COMMANDS[args.command]
    d = {}
    if args.spec is not None:
        with open(args.spec) as fh:
            d = json.load(fh)
    d["kind"] = kind
    if args.seed is not None:
        d["master_seed"] = args.seed
    try:
        spec = ExperimentSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        print(f"invalid spec: {exc}", file=sys.stderr)
        return 2
    out = args.out if args.out is not None else Path(spec.output_dir)
    try:
        if kind == "montecarlo":
            rows = aggregate(run_montecarlo(spec, args.threads, out))
        elif kind == "sweep_beta":
            rows = aggregate(run_sweep_beta(spec, args.threads, out))
        elif kind == "calibrate_beta":
            table = run_calibrate_beta(spec, args.threads, out)
            for (meth, K, M, o), b in sorted(table.entries.items()):
                print(f"{meth:9s} K={K:<3d} M={M:<5d} outliers={o:<3d} beta={b:.6g}")
            return 0
        elif kind == "sweep_mu":
            rows = run_sweep_mu(spec, out)
            print(f"{len(rows)} trace rows written to {out / 'trace.csv'}")
            return 0
        else:
            rows = run_image2d(spec, out)
            for r in rows:
                print(f"{r['method']:9s} psnr={clamp_psnr(r['psnr_db']):.2f} dB f1={r['f1']:.3f}")
            return 0
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for r in rows:
        print(f"{r['method']:9s} K={r['K']} M={r['M']} out={r['n_outliers']} beta={r['beta']:.4g} "
              f"correct={r['correct_rate']:.2f} psnr={r['mean_psnr_db']:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
