"""The exhaustive oracle itself, verified on hand-solvable cases."""

import math

import numpy as np
import pytest

from alphaweights import AlphaSet, DenseCovariance, brute_force_min, certify
from alphaweights.errors import DimensionMismatch, InfeasibleTarget
from conftest import random_dense_instance


def dense_2x2():
    alpha = AlphaSet([1.0, 0.1], [1.0, 1.0])
    cov = DenseCovariance([[1.0, 0.9], [0.9, 1.0]])
    return alpha, cov


class TestBruteForce:
    def test_single_stream(self):
        a = AlphaSet([0.5], [1.0])
        c = DenseCovariance([[1.0]])
        sol = brute_force_min(a, c, 0.5)
        np.testing.assert_allclose(sol.weights, [1.0])
        assert sol.support == (0,)

    def test_signed_two_by_two(self):
        # At the max-Sharpe P&L the pattern is (+,-) with weights from the
        # hand-inverted 2x2: w ~ (0.91, -0.8)/1.71, p* = 0.83/1.71.
        alpha, cov = dense_2x2()
        p_star = 0.83 / 1.71
        sol = brute_force_min(alpha, cov, p_star)
        np.testing.assert_allclose(
            sol.weights, [0.91 / 1.71, -0.8 / 1.71], atol=1e-10
        )
        assert sol.signs == (1, -1)
        assert abs(sol.mu) < 1e-10
        assert sol.certified_global

    def test_diagonal_three(self):
        a = AlphaSet([3.0, 2.0, 1.0], [1.0, 1.0, 1.0])
        c = DenseCovariance(np.eye(3))
        sol = brute_force_min(a, c, 2.8)
        np.testing.assert_allclose(sol.weights, [0.8, 0.2, 0.0], atol=1e-12)
        assert sol.support == (0, 1)
        assert sol.risk == pytest.approx(math.sqrt(0.68), rel=1e-12)

    def test_infeasible(self):
        a = AlphaSet([0.5, 0.2], [1.0, 1.0])
        c = DenseCovariance(np.eye(2))
        with pytest.raises(InfeasibleTarget):
            brute_force_min(a, c, 10.0)

    def test_size_cap(self):
        n = 13
        a = AlphaSet(np.ones(n), np.ones(n))
        c = DenseCovariance(np.eye(n))
        with pytest.raises(DimensionMismatch):
            brute_force_min(a, c, 0.5)

    def test_zero_costs_match_cost_free(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            alpha, cov = random_dense_instance(rng, 4)
            t = cov.solve(alpha.alphas)
            p_star = float(alpha.alphas @ t / np.sum(np.abs(t)))
            p = p_star * 1.2 if p_star > 0 else p_star * 0.8
            base = brute_force_min(alpha, cov, p)
            with_costs = brute_force_min(alpha, cov, p, costs=np.zeros(4))
            np.testing.assert_allclose(base.weights, with_costs.weights, atol=1e-14)

    def test_constraints_hold(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(2, 6))
            alpha, cov = random_dense_instance(rng, n)
            t = cov.solve(alpha.alphas)
            p_star = float(alpha.alphas @ t / np.sum(np.abs(t)))
            hi = float(np.max(np.abs(alpha.alphas)))
            p = p_star + 0.5 * (hi - p_star)
            sol = brute_force_min(alpha, cov, p)
            assert np.sum(np.abs(sol.weights)) == pytest.approx(1.0, abs=1e-10)
            assert float(alpha.alphas @ sol.weights) == pytest.approx(p, rel=1e-9)


class TestCertify:
    def test_oracle_output_passes(self):
        alpha, cov = dense_2x2()
        sol = brute_force_min(alpha, cov, 0.6)
        report = certify(sol, alpha, cov)
        assert report.all_ok
        assert report.certified_global

    def test_low_pnl_is_local_only(self):
        # Below the max-Sharpe P&L the multiplier turns negative: a local
        # minimum that cannot be certified global.
        alpha, cov = dense_2x2()
        p_star = 0.83 / 1.71
        sol = brute_force_min(alpha, cov, 0.8 * p_star)
        assert sol.mu < 0
        report = certify(sol, alpha, cov)
        assert not report.certified_global

    def test_perturbed_weights_fail(self):
        alpha, cov = dense_2x2()
        sol = brute_force_min(alpha, cov, 0.6)
        rng = np.random.default_rng(0)
        w = sol.weights + rng.normal(0, 1e-3, 2)
        w /= np.sum(np.abs(w))
        from alphaweights import WeightSolution

        bad = WeightSolution(
            weights=w,
            support=sol.support,
            signs=sol.signs,
            mu=sol.mu,
            mu_tilde=sol.mu_tilde,
            pnl=float(alpha.alphas @ w),
            risk=sol.risk,
            sharpe=sol.sharpe,
        )
        report = certify(bad, alpha, cov)
        assert not report.stationarity_ok
