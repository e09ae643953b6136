"""Signals, sensing operators and measurement simulation.

Signals are plain complex numpy arrays.  Operators map the last axis of
an array, so a stack of signals of shape ``(R, N)`` is handled in one call;
the solver relies on this to run restarts side by side.  2D images are
columnized (row-major) to length ``N1 * N2``.

Seeding rule: every random draw takes an ``int`` seed or a
``numpy.random.Generator``.  Experiments derive per-trial generators with
:func:`trial_rng`, i.e. ``default_rng([master_seed, trial, stream])``, so
trial ``t`` sees the same data no matter how many other trials run.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.fft as sfft

# float format for every CSV this package writes
FLOAT_FMT = "{:.17g}"

# largest input dimension for which operators build a dense Gram matrix
GRAM_MAX_DIM = 512


def _normal(op, x):
    """``A'A x`` over the last axis, through a cached dense Gram matrix when
    the input dimension is small (one matmul instead of two transforms)."""
    if op.input_dim > GRAM_MAX_DIM:
        return op.adjoint(op.apply(x))
    if getattr(op, "_gram_rows", None) is None:
        # row i holds A'A e_i, so x @ rows == A'A x
        op._gram_rows = op.adjoint(op.apply(np.eye(op.input_dim, dtype=complex)))
    return np.asarray(x) @ op._gram_rows


def trial_rng(master_seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Generator for ``(master_seed, trial, stream)``; streams separate data
    generation from per-method restarts within one trial."""
    return np.random.default_rng([int(master_seed), int(trial), int(stream)])


class MaskedDFT:
    """Unitary 1D or 2D DFT followed by selection of frequency samples.

    Parameters
    ----------
    shape : int or tuple of int
        Signal length ``N`` or image shape ``(N1, N2)``.
    mask : array_like of int, optional
        Sorted flat indices into the frequency grid.  Defaults to all.
    """

    kind = "masked-unitary-dft"

    def __init__(self, shape, mask=None):
        self.shape = (int(shape),) if np.isscalar(shape) else tuple(int(s) for s in shape)
        if len(self.shape) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        self.n_freq = int(np.prod(self.shape))
        if mask is None:
            mask = np.arange(self.n_freq)
        mask = np.asarray(mask, dtype=int)
        if mask.ndim != 1 or len(np.unique(mask)) != len(mask):
            raise ValueError("mask must be a 1D array of distinct indices")
        if len(mask) and (mask.min() < 0 or mask.max() >= self.n_freq):
            raise ValueError("mask index out of range")
        self.mask = np.sort(mask)
        self._axes = tuple(range(-len(self.shape), 0))

    @property
    def input_dim(self) -> int:
        return self.n_freq

    @property
    def output_dim(self) -> int:
        return len(self.mask)

    @property
    def left_unitary(self) -> bool:
        return self.output_dim == self.n_freq

    @property
    def right_unitary(self) -> bool:
        return True

    def _check(self, x, n):
        x = np.asarray(x)
        if x.shape[-1] != n:
            raise ValueError(f"dimension mismatch: expected last axis {n}, got {x.shape[-1]}")
        return x

    def apply_full(self, x):
        """Full unitary spectrum (flattened) of ``x``."""
        x = self._check(x, self.n_freq)
        if len(self.shape) == 1:
            return sfft.fft(x, axis=-1, norm="ortho")
        lead = x.shape[:-1]
        X = sfft.fft2(x.reshape(lead + self.shape), axes=self._axes, norm="ortho")
        return X.reshape(lead + (self.n_freq,))

    def inverse_full(self, spectrum):
        spectrum = self._check(spectrum, self.n_freq)
        if len(self.shape) == 1:
            return sfft.ifft(spectrum, axis=-1, norm="ortho")
        lead = spectrum.shape[:-1]
        x = sfft.ifft2(spectrum.reshape(lead + self.shape), axes=self._axes, norm="ortho")
        return x.reshape(lead + (self.n_freq,))

    def apply(self, x):
        full = self.apply_full(x)
        return full if self.left_unitary else full[..., self.mask]

    def normal(self, x):
        """``A'A x``."""
        return _normal(self, x)

    def take(self, rows):
        """Operator for a subset of rows (the same for every row here)."""
        return self

    def adjoint(self, v):
        v = self._check(v, self.output_dim)
        if self.left_unitary:
            return self.inverse_full(v)
        full = np.zeros(v.shape[:-1] + (self.n_freq,), dtype=complex)
        full[..., self.mask] = v
        return self.inverse_full(full)


class DenseOperator:
    """Explicit ``M x N`` complex sensing matrix."""

    kind = "dense-matrix"

    def __init__(self, matrix):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
        gram = self.matrix.conj().T @ self.matrix
        self._left_unitary = bool(np.allclose(gram, np.eye(gram.shape[0]), atol=1e-12))
        co = self.matrix @ self.matrix.conj().T
        self._right_unitary = bool(np.allclose(co, np.eye(co.shape[0]), atol=1e-12))

    @property
    def input_dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def output_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def left_unitary(self) -> bool:
        return self._left_unitary

    @property
    def right_unitary(self) -> bool:
        return self._right_unitary

    def apply(self, x):
        x = np.asarray(x)
        if x.shape[-1] != self.input_dim:
            raise ValueError(f"dimension mismatch: expected last axis {self.input_dim}, got {x.shape[-1]}")
        return x @ self.matrix.T

    def adjoint(self, v):
        v = np.asarray(v)
        if v.shape[-1] != self.output_dim:
            raise ValueError(f"dimension mismatch: expected last axis {self.output_dim}, got {v.shape[-1]}")
        return v @ self.matrix.conj()

    def normal(self, x):
        """``A'A x``."""
        return _normal(self, x)

    def take(self, rows):
        """Operator for a subset of rows (the same for every row here)."""
        return self


class RowStackOperator:
    """A different ``M x N`` matrix for every row of the input.

    Row ``r`` of ``x`` (shape ``(R, N)``) is mapped by ``matrices[r]``.
    The solver uses this to run independent problems (own mask, own data)
    side by side; :meth:`take` restricts the stack to a subset of rows.

    Parameters
    ----------
    matrices : array_like, shape (R, M, N)
    """

    kind = "row-stack"

    def __init__(self, matrices, _flags=None, _gram=None):
        self.matrices = np.asarray(matrices, dtype=complex)
        if self.matrices.ndim != 3:
            raise ValueError("matrices must have shape (R, M, N)")
        self._gram = _gram if _gram is not None else np.einsum(
            "rmi,rmj->rij", self.matrices.conj(), self.matrices)
        if _flags is None:
            eye_n, eye_m = np.eye(self.input_dim), np.eye(self.output_dim)
            co = np.einsum("rim,rjm->rij", self.matrices, self.matrices.conj())
            _flags = (bool(np.allclose(self._gram, eye_n, atol=1e-12)), bool(np.allclose(co, eye_m, atol=1e-12)))
        self._left_unitary, self._right_unitary = _flags

    @classmethod
    def from_operators(cls, ops) -> "RowStackOperator":
        """Stack the dense matrices of operators with equal dimensions."""
        mats = [op.apply(np.eye(op.input_dim, dtype=complex)).T for op in ops]
        if len({m.shape for m in mats}) != 1:
            raise ValueError("operators must share input and output dimensions")
        return cls(np.stack(mats))

    @property
    def n_rows(self) -> int:
        return self.matrices.shape[0]

    @property
    def input_dim(self) -> int:
        return self.matrices.shape[2]

    @property
    def output_dim(self) -> int:
        return self.matrices.shape[1]

    @property
    def left_unitary(self) -> bool:
        return self._left_unitary

    @property
    def right_unitary(self) -> bool:
        return self._right_unitary

    def _check(self, x, n):
        x = np.asarray(x)
        if x.shape != (self.n_rows, n):
            raise ValueError(f"expected shape {(self.n_rows, n)}, got {x.shape}")
        return x

    def apply(self, x):
        return np.einsum("rmn,rn->rm", self.matrices, self._check(x, self.input_dim))

    def adjoint(self, v):
        return np.einsum("rmn,rm->rn", self.matrices.conj(), self._check(v, self.output_dim))

    def normal(self, x):
        return np.einsum("rij,rj->ri", self._gram, self._check(x, self.input_dim))

    def take(self, rows) -> "RowStackOperator":
        return RowStackOperator(self.matrices[rows], (self._left_unitary, self._right_unitary),
                                self._gram[rows])


def random_mask(n_freq: int, m: int, seed=None) -> np.ndarray:
    """``m`` distinct frequency indices drawn uniformly, sorted."""
    if not 0 <= m <= n_freq:
        raise ValueError(f"cannot select {m} of {n_freq} frequencies")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_freq, size=m, replace=False))


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: np.ndarray
    shape: tuple = ()

    @property
    def K(self) -> int:
        return len(self.support)

    @property
    def N(self) -> int:
        return len(self.values)


def generate_sparse_signal(N: int, K: int, seed=None) -> SparseSignal:
    """K-sparse complex signal with amplitudes U[0.5, 1] and phases U[0, 2pi)."""
    if K < 0 or K > N:
        raise ValueError(f"sparsity K={K} must lie in [0, N={N}]")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(N, size=K, replace=False))
    amp = rng.uniform(0.5, 1.0, size=K)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=K)
    x = np.zeros(N, dtype=complex)
    x[support] = amp * np.exp(1j * phase)
    return SparseSignal(x, support, (N,))


@dataclass(frozen=True)
class MeasurementSet:
    """Measured ``y_m = |[Ax]_m|^q`` (plus corruption).

    ``mask`` holds the frequency index of each sample, ``outlier_indices``
    positions into ``y`` (0-based) that were overwritten.
    """

    y: np.ndarray
    mask: np.ndarray
    outlier_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    q: float = 2.0
    ground_truth: SparseSignal | None = None

    @property
    def M(self) -> int:
        return len(self.y)


def simulate_measurements(x, op, q: float = 2.0, noise_sigma: float | None = None, seed=None) -> MeasurementSet:
    """Noise-free (or additive-Gaussian) power-``q`` magnitude data."""
    truth = x if isinstance(x, SparseSignal) else None
    values = truth.values if truth is not None else np.asarray(x, dtype=complex)
    if values.shape[-1] != op.input_dim:
        raise ValueError(f"signal length {values.shape[-1]} does not match operator input {op.input_dim}")
    y = np.abs(op.apply(values)) ** q
    if noise_sigma:
        y = y + noise_sigma * np.random.default_rng(seed).standard_normal(y.shape)
    mask = getattr(op, "mask", np.arange(op.output_dim))
    return MeasurementSet(y=y, mask=np.asarray(mask), q=q, ground_truth=truth)


def inject_outliers(meas: MeasurementSet, count: int, seed=None) -> MeasurementSet:
    """Overwrite ``count`` uniformly chosen samples with twice the current maximum."""
    if count < 0 or count > meas.M:
        raise ValueError(f"cannot corrupt {count} of {meas.M} measurements")
    if count == 0:
        return meas
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(meas.M, size=count, replace=False))
    y = meas.y.copy()
    y[idx] = 2.0 * np.max(meas.y)
    merged = np.union1d(meas.outlier_indices, idx).astype(int)
    return replace(meas, y=y, outlier_indices=merged)


# -- phantoms -----------------------------------------------------------------

def dot_phantom(size: int = 64, n_per_edge: int = 6, margin: int = 8) -> np.ndarray:
    """Star-of-David pattern made of isolated unit dots on a ``size x size`` grid.

    Two overlapping triangles, ``n_per_edge`` dots per edge; coincident
    or touching dots are merged.
    """
    img = np.zeros((size, size))
    c = (size - 1) / 2.0
    rad = c - margin
    for flip in (1.0, -1.0):
        ang = np.pi / 2 + np.arange(3) * 2 * np.pi / 3
        verts = np.stack([c - flip * rad * np.sin(ang), c + rad * np.cos(ang)], axis=1)
        for k in range(3):
            p0, p1 = verts[k], verts[(k + 1) % 3]
            for t in np.linspace(0.0, 1.0, n_per_edge, endpoint=False):
                r, col = np.rint(p0 + t * (p1 - p0)).astype(int)
                # keep dots isolated: skip one that would touch an existing dot
                if not img[max(r - 1, 0):r + 2, max(col - 1, 0):col + 2].any():
                    img[r, col] = 1.0
    return img


# -- file formats -------------------------------------------------------------

def write_signal_csv(path, values) -> None:
    values = np.asarray(values, dtype=complex).ravel()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "real", "imag"])
        for i, v in enumerate(values):
            w.writerow([i, FLOAT_FMT.format(v.real), FLOAT_FMT.format(v.imag)])


def read_signal_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = np.zeros(len(rows), dtype=complex)
    for r in rows:
        out[int(r["index"])] = float(r["real"]) + 1j * float(r["imag"])
    return out


def write_measurements_csv(path, meas: MeasurementSet) -> None:
    out = set(int(i) for i in meas.outlier_indices)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "freq_index", "y", "is_outlier"])
        for i, (f, y) in enumerate(zip(meas.mask, meas.y)):
            w.writerow([i, int(f), FLOAT_FMT.format(y), int(i in out)])


def read_measurements_csv(path, q: float = 2.0) -> MeasurementSet:
    with open(path, newline="") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["index"]))
    y = np.array([float(r["y"]) for r in rows])
    mask = np.array([int(r["freq_index"]) for r in rows], dtype=int)
    outl = np.array([int(r["index"]) for r in rows if int(r["is_outlier"])], dtype=int)
    return MeasurementSet(y=y, mask=mask, outlier_indices=outl, q=q)


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) or ASCII (P2) grayscale PGM as float array."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise ValueError(f"{path}: not a grayscale PGM (magic {magic!r})")
    tokens, pos = [], 2
    while len(tokens) < 3:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while data[pos:pos + 1] not in (b"\n", b""):
                pos += 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    width, height, maxval = tokens
    if magic == b"P2":
        vals = np.array(data[pos:].split(), dtype=float)[: width * height]
    else:
        pos += 1
        dtype = ">u2" if maxval > 255 else "u1"
        vals = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos).astype(float)
    return vals.reshape(height, width)


def write_pgm(path, img, maxval: int = 255) -> None:
    """Write a binary PGM; ``img`` is clipped to ``[0, maxval]`` and rounded."""
    img = np.clip(np.rint(np.asarray(img, dtype=float)), 0, maxval)
    h, w = img.shape
    dtype = ">u2" if maxval > 255 else "u1"
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode())
        fh.write(img.astype(dtype).tobytes())
