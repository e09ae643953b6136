import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import companion_real_roots
from robustpr.model import DenseOperator, MaskedDFT
from robustpr.numerics import (
    cubic_roots,
    quartic_roots,
    real_roots_cubic,
    real_roots_quartic,
    spectral_norm,
    unit_phase,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def _residual_ok(coeffs, roots):
    """``|p(r)| <= 1e-9 * max|c| * max(1, |r|)^deg``; for ``|r| > 1`` both
    sides are divided by ``|r|^deg`` to avoid overflow."""
    c = np.asarray(coeffs, dtype=float)
    sc = np.abs(c).max()
    for r in roots:
        if abs(r) > 1.0:
            lhs = abs(np.polyval(c[::-1], 1.0 / r))
        else:
            lhs = abs(np.polyval(c, r))
        if lhs > 1e-9 * sc:
            return False
    return True


def _match(mine, ref, scale):
    return len(mine) == len(ref) and all(
        abs(a - b) <= 1e-9 * scale * max(1.0, abs(b)) for a, b in zip(mine, ref))


class TestCubic:
    def test_single_real_root(self):
        assert real_roots_cubic([2, 0, -1, -1]) == pytest.approx([1.0], abs=1e-12)

    def test_triple_root_at_origin(self):
        assert real_roots_cubic([1, 0, 0, 0]) == pytest.approx([0.0], abs=1e-12)

    def test_prox_cubic_contains_unit_root(self):
        mu, y, d = 2.0, 1.0, 1.0
        roots = real_roots_cubic([4, 0, mu - 4 * y, -mu * d])
        assert any(abs(r - 1.0) < 1e-12 for r in roots)

    def test_three_distinct_roots(self):
        # (x-1)(x-2)(x+3) = x^3 - 7x + 6
        assert real_roots_cubic([1, 0, -7, 6]) == pytest.approx([-3.0, 1.0, 2.0], abs=1e-12)

    def test_double_root_reported_once(self):
        # (x-1)^2 (x+2) = x^3 - 3x + 2
        assert real_roots_cubic([1, 0, -3, 2]) == pytest.approx([-2.0, 1.0], abs=1e-7)

    @pytest.mark.parametrize("coeffs,expected", [
        ([0, 1, 0, -4], [-2.0, 2.0]),
        ([0, 0, 2, -1], [0.5]),
        ([0, 1, 0, 1], []),
        ([0, 0, 0, 3], []),
    ])
    def test_degenerate_degrees(self, coeffs, expected):
        assert real_roots_cubic(coeffs) == pytest.approx(expected, abs=1e-12)

    def test_zero_polynomial_rejected(self):
        with pytest.raises(ValueError, match="identically zero polynomial"):
            real_roots_cubic([0, 0, 0, 0])

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            real_roots_cubic([1, np.nan, 0, 0])

    def test_tiny_leading_coefficient(self):
        c = [1e-12, 1, 0, -1]
        assert _match(real_roots_cubic(c), companion_real_roots(c), 1.0)

    def test_matches_companion_oracle(self):
        rng = np.random.default_rng(11)
        for c in rng.standard_normal((500, 4)):
            mine = real_roots_cubic(c)
            assert _match(mine, companion_real_roots(c), np.abs(c).max()), c
            assert _residual_ok(c, mine)

    def test_batched_equals_scalar(self):
        rng = np.random.default_rng(3)
        C = rng.standard_normal((7, 5, 4))
        R = cubic_roots(C)
        assert R.shape == (7, 5, 3)
        for i in range(7):
            for j in range(5):
                got = sorted(r for r in R[i, j] if np.isfinite(r))
                assert _residual_ok(C[i, j], got)
                for r in real_roots_cubic(C[i, j]):
                    assert min(abs(r - g) for g in got) < 1e-7 * max(1.0, abs(r))

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=4, max_size=4).filter(lambda c: any(abs(v) > 1e-3 for v in c)))
    def test_roots_have_small_residual(self, c):
        assert _residual_ok(c, real_roots_cubic(c))


class TestQuartic:
    def test_symmetric_pair(self):
        assert real_roots_quartic([1, 0, 0, 0, -1]) == pytest.approx([-1.0, 1.0], abs=1e-12)

    def test_degenerates_to_cubic(self):
        assert real_roots_quartic([0, 1, 0, -1, 0]) == pytest.approx([-1.0, 0.0, 1.0], abs=1e-12)

    def test_four_roots(self):
        # (x^2-1)(x^2-4)
        assert real_roots_quartic([1, 0, -5, 0, 4]) == pytest.approx([-2, -1, 1, 2], abs=1e-12)

    def test_biquadratic_without_real_roots(self):
        assert real_roots_quartic([1, 0, 1, 0, 1]) == []

    def test_zero_polynomial_rejected(self):
        with pytest.raises(ValueError, match="identically zero"):
            real_roots_quartic([0, 0, 0, 0, 0])

    def test_tiny_leading_coefficient(self):
        c = [1e-17, 5, 0, -3, -1e-17]
        assert _match(real_roots_quartic(c), companion_real_roots(c), 1.0)

    def test_matches_companion_oracle(self):
        rng = np.random.default_rng(12)
        for c in rng.standard_normal((500, 5)):
            mine = real_roots_quartic(c)
            assert _match(mine, companion_real_roots(c), np.abs(c).max()), c
            assert _residual_ok(c, mine)

    def test_batched_shape_and_padding(self):
        R = quartic_roots(np.array([[1, 0, 1, 0, 1], [1, 0, -5, 0, 4]], dtype=float))
        assert R.shape == (2, 4)
        assert np.all(np.isnan(R[0]))
        assert sorted(R[1]) == pytest.approx([-2, -1, 1, 2])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(finite, min_size=5, max_size=5).filter(lambda c: any(abs(v) > 1e-3 for v in c)))
    def test_roots_have_small_residual(self, c):
        assert _residual_ok(c, real_roots_quartic(c))


class TestUnitPhase:
    @pytest.mark.parametrize("z,expected", [(3 + 4j, 0.6 + 0.8j), (0, 1 + 0j), (-2, -1 + 0j)])
    def test_examples(self, z, expected):
        assert unit_phase(z) == pytest.approx(expected, abs=1e-15)

    def test_array_zero_convention(self):
        out = unit_phase(np.array([0, 2j, -1e-300]))
        np.testing.assert_allclose(out, [1, 1j, -1])

    @given(st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False))
    def test_unit_modulus_and_reconstruction(self, z):
        ph = unit_phase(z)
        assert abs(abs(ph) - 1.0) < 1e-12
        if z != 0:
            assert abs(ph * abs(z) - z) <= 1e-12 * abs(z)


class TestSpectralNorm:
    def test_identity(self):
        for n in (1, 5, 17):
            assert spectral_norm(DenseOperator(np.eye(n))).value == pytest.approx(1.0, rel=1e-8)

    def test_masked_dft(self):
        op = MaskedDFT(64, np.arange(0, 64, 3))
        res = spectral_norm(op)
        assert res.converged
        assert res.value == pytest.approx(1.0, rel=1e-8)

    def test_diagonal(self):
        assert spectral_norm(DenseOperator(np.diag([1.0, 2.0, 3.0]))).value == pytest.approx(3.0, rel=1e-6)

    def test_random_matrix_against_svd(self):
        A = np.random.default_rng(0).standard_normal((12, 7))
        assert spectral_norm(DenseOperator(A), max_iters=2000, tol=1e-12).value == pytest.approx(
            np.linalg.svd(A, compute_uv=False)[0], rel=1e-6)

    def test_nonconvergence_inflates_estimate(self):
        A = np.diag([1.0, 0.999, 0.5])
        res = spectral_norm(DenseOperator(A), max_iters=2, tol=1e-15)
        assert not res.converged
        assert res.value >= 1.0
