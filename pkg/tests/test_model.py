import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dft_matrix
from robustpr.model import (
    DenseOperator,
    MaskedDFT,
    MeasurementSet,
    RowStackOperator,
    dot_phantom,
    generate_sparse_signal,
    inject_outliers,
    random_mask,
    read_measurements_csv,
    read_pgm,
    read_signal_csv,
    simulate_measurements,
    trial_rng,
    write_measurements_csv,
    write_pgm,
    write_signal_csv,
)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestSparseSignal:
    def test_zero_sparsity(self):
        sig = generate_sparse_signal(128, 0, seed=1)
        assert sig.K == 0 and not np.any(sig.values)

    def test_amplitudes_and_support(self):
        sig = generate_sparse_signal(128, 3, seed=7)
        nz = np.flatnonzero(sig.values)
        assert len(nz) == 3
        np.testing.assert_array_equal(nz, sig.support)
        amp = np.abs(sig.values[nz])
        assert np.all((amp >= 0.5) & (amp <= 1.0))

    def test_deterministic(self):
        a = generate_sparse_signal(64, 5, seed=3)
        b = generate_sparse_signal(64, 5, seed=3)
        assert a.values.tobytes() == b.values.tobytes()

    def test_too_sparse_rejected(self):
        with pytest.raises(ValueError):
            generate_sparse_signal(4, 5, seed=0)

    def test_trial_rng_streams_independent_of_trial_count(self):
        a = trial_rng(9, 4).standard_normal(3)
        _ = [trial_rng(9, t).standard_normal(3) for t in range(4)]
        np.testing.assert_array_equal(a, trial_rng(9, 4).standard_normal(3))
        assert not np.array_equal(a, trial_rng(9, 4, stream=1).standard_normal(3))


class TestMaskedDFT:
    def test_matches_dense_dft(self):
        rng = np.random.default_rng(0)
        mask = random_mask(16, 9, seed=2)
        op = MaskedDFT(16, mask)
        x = crandn(rng, 16)
        np.testing.assert_allclose(op.apply(x), dft_matrix(16)[mask] @ x, atol=1e-12)

    def test_full_mask_unitary(self):
        rng = np.random.default_rng(1)
        op = MaskedDFT(32)
        x = crandn(rng, 32)
        np.testing.assert_allclose(op.adjoint(op.apply(x)), x, atol=1e-12)
        assert np.linalg.norm(op.apply(x)) == pytest.approx(np.linalg.norm(x), abs=1e-12)
        assert op.left_unitary and op.right_unitary

    def test_rows_orthonormal(self):
        rng = np.random.default_rng(2)
        op = MaskedDFT(32, random_mask(32, 11, seed=5))
        v = crandn(rng, 11)
        np.testing.assert_allclose(op.apply(op.adjoint(v)), v, atol=1e-12)
        assert not op.left_unitary

    @pytest.mark.parametrize("shape,m", [(64, 20), ((8, 6), 30), (32, 32)])
    def test_adjoint_identity(self, shape, m):
        rng = np.random.default_rng(3)
        n = int(np.prod(shape))
        op = MaskedDFT(shape, random_mask(n, m, seed=1))
        x, v = crandn(rng, n), crandn(rng, m)
        assert np.vdot(op.apply(x), v) == pytest.approx(np.vdot(x, op.adjoint(v)), abs=1e-10)

    def test_2d_matches_fft2(self):
        rng = np.random.default_rng(4)
        img = crandn(rng, 6, 10)
        op = MaskedDFT((6, 10))
        np.testing.assert_allclose(op.apply(img.ravel()), np.fft.fft2(img, norm="ortho").ravel(), atol=1e-12)

    def test_batched_rows(self):
        rng = np.random.default_rng(5)
        op = MaskedDFT(16, random_mask(16, 7, seed=0))
        X = crandn(rng, 4, 16)
        np.testing.assert_allclose(op.apply(X)[2], op.apply(X[2]), atol=1e-13)

    def test_dimension_mismatch(self):
        op = MaskedDFT(16, np.arange(5))
        with pytest.raises(ValueError, match="dimension mismatch"):
            op.apply(np.zeros(15))
        with pytest.raises(ValueError, match="dimension mismatch"):
            op.adjoint(np.zeros(6))

    def test_bad_masks(self):
        with pytest.raises(ValueError):
            MaskedDFT(8, [0, 0, 1])
        with pytest.raises(ValueError):
            MaskedDFT(8, [9])


class TestDenseOperator:
    def test_two_by_two(self):
        A = np.array([[1, 2j], [3, -1]])
        op = DenseOperator(A)
        np.testing.assert_allclose(op.apply(np.array([1, 1j])), [1 - 2, 3 - 1j])
        np.testing.assert_allclose(op.adjoint(np.array([1, 0])), [1, -2j])

    def test_adjoint_identity(self):
        rng = np.random.default_rng(6)
        op = DenseOperator(crandn(rng, 7, 5))
        x, v = crandn(rng, 5), crandn(rng, 7)
        assert np.vdot(op.apply(x), v) == pytest.approx(np.vdot(x, op.adjoint(v)), abs=1e-10)

    def test_unitarity_flags(self):
        F = dft_matrix(8)
        assert DenseOperator(F).left_unitary
        assert DenseOperator(F[:3]).right_unitary and not DenseOperator(F[:3]).left_unitary
        assert not DenseOperator(2 * F).left_unitary


class TestNormalOperator:
    @pytest.mark.parametrize("shape,m", [(16, 16), (16, 7), ((4, 6), 10), (600, 300)])
    def test_masked_dft_normal(self, shape, m):
        rng = np.random.default_rng(13)
        op = MaskedDFT(shape, random_mask(int(np.prod(shape)), m, rng))
        x = crandn(rng, 3, op.input_dim)
        np.testing.assert_allclose(op.normal(x), op.adjoint(op.apply(x)), atol=1e-12)

    def test_dense_normal(self):
        rng = np.random.default_rng(14)
        A = crandn(rng, 5, 4)
        x = crandn(rng, 4)
        np.testing.assert_allclose(DenseOperator(A).normal(x), A.conj().T @ (A @ x), atol=1e-12)


class TestRowStackOperator:
    def test_rows_use_their_own_matrix(self):
        rng = np.random.default_rng(15)
        ops = [MaskedDFT(8, random_mask(8, 5, rng)) for _ in range(3)]
        stack = RowStackOperator.from_operators(ops)
        x, v = crandn(rng, 3, 8), crandn(rng, 3, 5)
        for r, op in enumerate(ops):
            np.testing.assert_allclose(stack.apply(x)[r], op.apply(x[r]), atol=1e-12)
            np.testing.assert_allclose(stack.adjoint(v)[r], op.adjoint(v[r]), atol=1e-12)
            np.testing.assert_allclose(stack.normal(x)[r], op.normal(x[r]), atol=1e-12)
        assert stack.right_unitary and not stack.left_unitary

    def test_take_subset(self):
        rng = np.random.default_rng(16)
        mats = crandn(rng, 4, 3, 2)
        stack = RowStackOperator(mats)
        sub = stack.take(np.array([3, 1]))
        x = crandn(rng, 2, 2)
        np.testing.assert_allclose(sub.apply(x), [mats[3] @ x[0], mats[1] @ x[1]])
        assert sub.left_unitary == stack.left_unitary

    def test_shape_checks(self):
        stack = RowStackOperator(np.ones((2, 3, 4)))
        with pytest.raises(ValueError):
            stack.apply(np.ones((3, 4)))
        with pytest.raises(ValueError):
            RowStackOperator(np.ones((3, 4)))
        with pytest.raises(ValueError):
            RowStackOperator.from_operators([MaskedDFT(8, [0, 1]), MaskedDFT(8, [0, 1, 2])])


class TestMeasurements:
    def test_spike_has_flat_spectrum(self):
        x = np.zeros(16, dtype=complex)
        x[0] = 1.0
        meas = simulate_measurements(x, MaskedDFT(16))
        np.testing.assert_allclose(meas.y, np.full(16, 1 / 16), atol=1e-15)

    def test_zero_signal(self):
        meas = simulate_measurements(np.zeros(8), MaskedDFT(8, [1, 4]))
        assert np.all(meas.y == 0)

    def test_parseval(self):
        sig = generate_sparse_signal(64, 5, seed=2)
        meas = simulate_measurements(sig, MaskedDFT(64))
        assert meas.y.sum() == pytest.approx(np.linalg.norm(sig.values) ** 2, rel=1e-12)
        assert meas.ground_truth is sig

    def test_mask_recorded(self):
        mask = random_mask(32, 10, seed=3)
        meas = simulate_measurements(np.ones(32), MaskedDFT(32, mask))
        np.testing.assert_array_equal(meas.mask, mask)

    def test_noise_option(self):
        x = np.ones(16)
        op = MaskedDFT(16)
        a = simulate_measurements(x, op, noise_sigma=0.1, seed=4)
        b = simulate_measurements(x, op, noise_sigma=0.1, seed=4)
        clean = simulate_measurements(x, op)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.allclose(a.y, clean.y)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            simulate_measurements(np.ones(10), MaskedDFT(16))


class TestOutliers:
    def _meas(self, y):
        y = np.asarray(y, dtype=float)
        return MeasurementSet(y=y, mask=np.arange(len(y)))

    def test_count_zero_unchanged(self):
        m = self._meas([1, 2, 3])
        assert inject_outliers(m, 0, seed=0) is m

    def test_single_outlier_value(self):
        m = inject_outliers(self._meas([1, 2, 3]), 1, seed=0)
        (i,) = m.outlier_indices
        expect = np.array([1.0, 2.0, 3.0])
        expect[i] = 6.0
        np.testing.assert_array_equal(m.y, expect)

    def test_all_entries(self):
        m = inject_outliers(self._meas([1, 5, 3]), 3, seed=1)
        np.testing.assert_array_equal(m.y, [10, 10, 10])

    def test_too_many(self):
        with pytest.raises(ValueError):
            inject_outliers(self._meas([1, 2]), 3, seed=0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 40), st.integers(0, 2**31 - 1))
    def test_changes_exactly_count_entries(self, count, seed):
        rng = np.random.default_rng(seed)
        m = self._meas(rng.uniform(0, 1, 40))
        out = inject_outliers(m, count, seed=seed)
        changed = np.flatnonzero(out.y != m.y)
        assert len(out.outlier_indices) == count
        assert set(changed) <= set(out.outlier_indices)
        assert np.all(out.y[out.outlier_indices] == 2 * m.y.max())

    def test_deterministic(self):
        m = self._meas(np.arange(20.0))
        a, b = inject_outliers(m, 4, seed=5), inject_outliers(m, 4, seed=5)
        assert a.y.tobytes() == b.y.tobytes()


class TestFiles:
    def test_signal_roundtrip(self, tmp_path):
        x = crandn(np.random.default_rng(0), 9) / 3
        write_signal_csv(tmp_path / "x.csv", x)
        np.testing.assert_array_equal(read_signal_csv(tmp_path / "x.csv"), x)
        assert (tmp_path / "x.csv").read_text().splitlines()[0] == "index,real,imag"

    def test_measurement_roundtrip(self, tmp_path):
        sig = generate_sparse_signal(32, 3, seed=1)
        meas = inject_outliers(simulate_measurements(sig, MaskedDFT(32, random_mask(32, 12, seed=2))), 2, seed=3)
        write_measurements_csv(tmp_path / "m.csv", meas)
        back = read_measurements_csv(tmp_path / "m.csv")
        np.testing.assert_array_equal(back.y, meas.y)
        np.testing.assert_array_equal(back.mask, meas.mask)
        np.testing.assert_array_equal(back.outlier_indices, meas.outlier_indices)

    @pytest.mark.parametrize("maxval", [255, 65535])
    def test_pgm_roundtrip(self, tmp_path, maxval):
        img = np.random.default_rng(1).integers(0, maxval + 1, size=(5, 7)).astype(float)
        write_pgm(tmp_path / "a.pgm", img, maxval)
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)

    def test_ascii_pgm_with_comment(self, tmp_path):
        (tmp_path / "a.pgm").write_text("P2\n# hi\n3 2\n9\n0 1 2\n3 4 9\n")
        np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), [[0, 1, 2], [3, 4, 9]])

    def test_color_image_rejected(self, tmp_path):
        (tmp_path / "c.ppm").write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(ValueError, match="grayscale"):
            read_pgm(tmp_path / "c.ppm")


def test_dot_phantom_isolated_dots():
    img = dot_phantom(64)
    assert img.shape == (64, 64)
    assert set(np.unique(img)) == {0.0, 1.0}
    pts = np.argwhere(img > 0)
    assert len(pts) >= 20
    gaps = np.abs(pts[:, None] - pts[None]).max(-1)
    np.fill_diagonal(gaps, 99)
    assert gaps.min() >= 2
