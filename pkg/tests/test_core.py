"""Core types, statistics and covariance application."""

import math

import numpy as np
import pytest

from alphaweights import (
    AlphaSet,
    DenseCovariance,
    FactorCovariance,
    covariance_apply,
    portfolio_stats,
    validate_weights,
)
from alphaweights.errors import (
    DegenerateWeights,
    DimensionMismatch,
    NotPositiveDefinite,
    SharpeUndefined,
)
from conftest import random_factor_cov


class TestAlphaSet:
    def test_basic(self):
        a = AlphaSet([0.1, 0.2], [1.0, 2.0], [0.3, 0.4])
        assert a.n == 2
        np.testing.assert_allclose(a.inv_vols, [1.0, 0.5])
        np.testing.assert_allclose(a.scaled_alphas, [0.1, 0.1])

    def test_rejects_bad_vols(self):
        with pytest.raises(ValueError):
            AlphaSet([0.1], [0.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            AlphaSet([0.1, 0.2], [1.0])
        with pytest.raises(DimensionMismatch):
            AlphaSet([0.1], [1.0], [0.3, 0.4])

    def test_rejects_negative_turnover(self):
        with pytest.raises(ValueError):
            AlphaSet([0.1], [1.0], [-0.1])


class TestCovariance:
    def test_dense_rejects_asymmetric(self):
        with pytest.raises(NotPositiveDefinite):
            DenseCovariance([[1.0, 0.5], [0.2, 1.0]])

    def test_dense_symmetrizes_tiny_asymmetry(self):
        c = DenseCovariance([[1.0, 0.5 + 1e-14], [0.5, 1.0]])
        assert c.matrix[0, 1] == c.matrix[1, 0]

    def test_dense_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            DenseCovariance([[1.0, 2.0], [2.0, 1.0]])

    def test_factor_rejects_bad_specific(self):
        with pytest.raises(NotPositiveDefinite):
            FactorCovariance([1.0, 0.0], [[0.1], [0.1]], [[1.0]])

    def test_apply_identity(self):
        c = DenseCovariance(np.eye(3))
        np.testing.assert_array_equal(covariance_apply(c, [1.0, 2.0, 3.0]), [1, 2, 3])

    def test_apply_factor_by_hand(self):
        # specific 1,1 with a single unit loading: dense form [[2,1],[1,2]]
        c = FactorCovariance([1.0, 1.0], [[1.0], [1.0]], [[1.0]])
        np.testing.assert_allclose(covariance_apply(c, [1.0, 0.0]), [2.0, 1.0])

    def test_apply_factor_zero_loadings(self):
        c = FactorCovariance([4.0, 9.0], [[0.0], [0.0]], [[1.0]])
        np.testing.assert_allclose(covariance_apply(c, [1.0, 1.0]), [4.0, 9.0])

    def test_factor_apply_matches_densified(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(2, 51))
            f = int(rng.integers(1, 11))
            cov = random_factor_cov(rng, n, f)
            dense = cov.densify()
            v = rng.standard_normal(n)
            np.testing.assert_allclose(
                cov.apply(v), dense @ v, rtol=0, atol=1e-12 * max(1, np.abs(dense @ v).max())
            )

    def test_factor_solve_matches_dense_inverse(self):
        rng = np.random.default_rng(8)
        cov = random_factor_cov(rng, 20, 3)
        v = rng.standard_normal(20)
        np.testing.assert_allclose(
            cov.apply(cov.solve(v)), v, rtol=0, atol=1e-10
        )

    def test_apply_dimension_mismatch(self):
        c = DenseCovariance(np.eye(3))
        with pytest.raises(DimensionMismatch):
            c.apply([1.0, 2.0])


class TestValidateWeights:
    def test_rescale(self):
        sol = validate_weights([2.0, 2.0])
        np.testing.assert_allclose(sol.weights, [0.5, 0.5])
        assert sol.support == (0, 1)
        assert sol.signs == (1, 1)

    def test_sign_extraction(self):
        sol = validate_weights([3.0, -1.0, 0.0])
        np.testing.assert_allclose(sol.weights, [0.75, -0.25, 0.0])
        assert sol.support == (0, 1)
        assert sol.inactive == (2,)
        assert sol.signs == (1, -1)

    def test_tolerance_zeroing(self):
        sol = validate_weights([1e-14, 1.0], tol=1e-12)
        np.testing.assert_array_equal(sol.weights, [0.0, 1.0])
        assert sol.support == (1,)
        assert sol.inactive == (0,)

    def test_all_zero(self):
        with pytest.raises(DegenerateWeights):
            validate_weights([0.0, 0.0])


class TestPortfolioStats:
    def test_single_stream(self):
        a = AlphaSet([0.02], [0.1])
        c = DenseCovariance([[0.01]])
        s = portfolio_stats([1.0], a, c, 1e6)
        assert s.pnl == pytest.approx(20000.0)
        assert s.risk == pytest.approx(100000.0)
        assert s.sharpe == pytest.approx(0.2)

    def test_two_stream_symmetric(self):
        a = AlphaSet([1.0, 1.0], [1.0, 1.0])
        c = DenseCovariance(np.eye(2))
        s = portfolio_stats([0.5, 0.5], a, c, 1.0)
        assert s.pnl == pytest.approx(1.0)
        assert s.risk == pytest.approx(math.sqrt(0.5))
        assert s.sharpe == pytest.approx(math.sqrt(2.0))

    def test_signed_two_stream(self):
        # Max-Sharpe weights of this dense pair, computed from the 2x2
        # inverse by hand: C^{-1} alpha ~ (0.91, -0.8)/0.19.
        a = AlphaSet([1.0, 0.1], [1.0, 1.0])
        c = DenseCovariance([[1.0, 0.9], [0.9, 1.0]])
        w = np.array([0.91, -0.8]) / 1.71
        s = portfolio_stats(w, a, c, 1.0)
        assert s.pnl == pytest.approx(0.83 / 1.71, rel=1e-12)
        assert s.sharpe == pytest.approx(math.sqrt(0.83 / 0.19), rel=1e-10)
        assert s.risk == pytest.approx(s.pnl / s.sharpe, rel=1e-12)

    def test_homogeneous_in_investment(self):
        rng = np.random.default_rng(3)
        a = AlphaSet(rng.uniform(0.1, 1, 4), rng.uniform(0.5, 2, 4))
        c = DenseCovariance(np.diag(a.vols**2))
        w = rng.uniform(-1, 1, 4)
        s1 = portfolio_stats(w, a, c, 1.0)
        s9 = portfolio_stats(w, a, c, 9.0)
        assert s9.pnl == pytest.approx(9 * s1.pnl, rel=1e-14)
        assert s9.risk == pytest.approx(9 * s1.risk, rel=1e-14)
        assert s9.sharpe == pytest.approx(s1.sharpe, rel=1e-14)

    def test_scale_invariant_sharpe(self):
        rng = np.random.default_rng(4)
        a = AlphaSet(rng.uniform(0.1, 1, 5), rng.uniform(0.5, 2, 5))
        c = DenseCovariance(np.diag(a.vols**2))
        w = rng.uniform(0.1, 1, 5)
        s1 = portfolio_stats(w, a, c, 1.0)
        s2 = portfolio_stats(3.7 * w, a, c, 1.0)
        assert s2.sharpe == pytest.approx(s1.sharpe, rel=1e-14)

    def test_sharpe_undefined(self):
        a = AlphaSet([1.0], [1.0])
        c = DenseCovariance([[1e-300]])
        with pytest.raises(SharpeUndefined):
            portfolio_stats([1e-200], a, c, 1.0)

    def test_dimension_mismatch(self):
        a = AlphaSet([1.0, 2.0], [1.0, 1.0])
        c = DenseCovariance(np.eye(2))
        with pytest.raises(DimensionMismatch):
            portfolio_stats([1.0], a, c, 1.0)
