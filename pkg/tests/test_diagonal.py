"""Diagonal-case solvers against closed forms and the exhaustive oracle."""

import itertools
import math

import numpy as np
import pytest

from alphaweights import (
    AlphaSet,
    DenseCovariance,
    brute_force_min,
    greedy_sort,
    min_vol_fixed_pnl_diag,
    quasi_optimal,
    sharpe_target_diag,
    sphere_optimal,
)
from alphaweights.errors import (
    BelowSharpeMaxPnl,
    EmptyInput,
    InfeasibleSharpe,
    InfeasibleTarget,
    InvalidTarget,
    NegativeAlpha,
)
from conftest import random_diag_alpha

FIX = AlphaSet([3.0, 2.0, 1.0], [1.0, 1.0, 1.0])


def greedy_oracle(alpha):
    """Step-by-step exhaustive check of the greedy choice at each size."""
    n = alpha.n
    na = alpha.inv_vols**2 * alpha.alphas
    na2 = na * alpha.alphas
    chosen = []
    for _ in range(n):
        rest = [i for i in range(n) if i not in chosen]
        a0 = sum(na[i] for i in chosen)
        b0 = sum(na2[i] for i in chosen)
        best = max(rest, key=lambda i: (b0 + na2[i]) / (a0 + na[i]))
        chosen.append(best)
    return chosen


class TestGreedySort:
    def test_fixture_paths(self):
        order = greedy_sort(FIX)
        np.testing.assert_array_equal(order.permutation, [0, 1, 2])
        np.testing.assert_allclose(order.pnl_path, [3.0, 13.0 / 5.0, 7.0 / 3.0])
        np.testing.assert_allclose(
            order.sharpe_path, [3.0, math.sqrt(13.0), math.sqrt(14.0)]
        )

    def test_ties_pick_lowest_index(self):
        order = greedy_sort(AlphaSet([1.0, 1.0, 1.0], [1.0, 1.0, 1.0]))
        np.testing.assert_array_equal(order.permutation, [0, 1, 2])
        np.testing.assert_allclose(order.pnl_path, [1.0, 1.0, 1.0])

    def test_single(self):
        order = greedy_sort(AlphaSet([0.7], [2.0]))
        np.testing.assert_array_equal(order.permutation, [0])
        np.testing.assert_allclose(order.pnl_path, [0.7])

    def test_negative_alpha_rejected(self):
        with pytest.raises(NegativeAlpha):
            greedy_sort(AlphaSet([1.0, -0.1], [1.0, 1.0]))

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            greedy_sort(AlphaSet(np.zeros(0), np.zeros(0) + 1.0))

    def test_matches_stepwise_oracle(self):
        rng = np.random.default_rng(21)
        for _ in range(50):
            alpha = random_diag_alpha(rng, int(rng.integers(2, 9)))
            order = greedy_sort(alpha)
            np.testing.assert_array_equal(order.permutation, greedy_oracle(alpha))

    def test_pnl_path_decreasing_sharpe_increasing(self):
        rng = np.random.default_rng(22)
        for _ in range(200):
            alpha = random_diag_alpha(rng, int(rng.integers(2, 21)))
            order = greedy_sort(alpha)
            assert np.all(np.diff(order.pnl_path) < 0.0)
            assert np.all(np.diff(order.sharpe_path) > 0.0)


class TestQuasiOptimal:
    def test_fixture(self):
        # Root of the marginal-fraction quadratic 27.56 x^2 - 72 x + 17.01
        # in (0, 1], computed to 50 digits and frozen; S lands on 3.3 exactly.
        sol = quasi_optimal(FIX, 3.3)
        np.testing.assert_allclose(
            sol.weights,
            [0.8509878193113669, 0.1490121806886331, 0.0],
            atol=1e-12,
        )
        assert sol.sharpe == pytest.approx(3.3, abs=1e-12)
        frac = 1.5 * sol.weights[1] / sol.weights[0]
        assert frac == pytest.approx(0.2626574270050355, abs=1e-13)

    def test_target_at_max(self):
        sol = quasi_optimal(FIX, math.sqrt(14.0))
        np.testing.assert_allclose(sol.weights, [0.5, 1 / 3, 1 / 6], atol=1e-12)

    def test_target_on_path_gives_full_fraction(self):
        sol = quasi_optimal(FIX, math.sqrt(13.0))
        np.testing.assert_allclose(sol.weights, [0.6, 0.4, 0.0], atol=1e-12)

    def test_achieves_target(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            alpha = random_diag_alpha(rng, int(rng.integers(2, 15)))
            ahat = alpha.scaled_alphas
            order = greedy_sort(alpha)
            s1 = order.sharpe_path[0]
            s_max = order.sharpe_path[-1]
            s_star = s1 + (s_max - s1) * rng.uniform(0.05, 0.98)
            sol = quasi_optimal(alpha, s_star)
            assert sol.sharpe == pytest.approx(s_star, abs=1e-9)
            assert np.all(sol.weights >= 0.0)

    def test_rejects_bad_targets(self):
        with pytest.raises(InvalidTarget):
            quasi_optimal(FIX, 0.0)
        with pytest.raises(InfeasibleSharpe):
            quasi_optimal(FIX, 4.0)


class TestMinVolFixedPnl:
    def test_fixture(self):
        sol = min_vol_fixed_pnl_diag(FIX, 2.8)
        np.testing.assert_allclose(sol.weights, [0.8, 0.2, 0.0], atol=1e-12)
        assert sol.risk == pytest.approx(math.sqrt(0.68), rel=1e-12)
        assert sol.sharpe == pytest.approx(2.8 / math.sqrt(0.68), rel=1e-12)
        assert sol.mu is not None and sol.mu > 0

    def test_max_sharpe_point(self):
        sol = min_vol_fixed_pnl_diag(FIX, 7.0 / 3.0)
        np.testing.assert_allclose(sol.weights, [0.5, 1 / 3, 1 / 6], atol=1e-12)
        assert sol.sharpe == pytest.approx(math.sqrt(14.0), rel=1e-12)
        assert sol.mu == pytest.approx(0.0, abs=1e-14)

    def test_single_stream(self):
        sol = min_vol_fixed_pnl_diag(AlphaSet([0.4], [2.0]), 0.4)
        np.testing.assert_allclose(sol.weights, [1.0])

    def test_rejects_out_of_range(self):
        with pytest.raises(InfeasibleTarget):
            min_vol_fixed_pnl_diag(FIX, 3.0)
        with pytest.raises(BelowSharpeMaxPnl):
            min_vol_fixed_pnl_diag(FIX, 1.0)

    def test_matches_oracle(self):
        rng = np.random.default_rng(24)
        for _ in range(30):
            n = int(rng.integers(2, 7))
            alpha = random_diag_alpha(rng, n)
            cov = DenseCovariance(np.diag(alpha.vols**2))
            lo = float(
                np.sum(alpha.scaled_alphas**2)
                / np.dot(alpha.inv_vols, alpha.scaled_alphas)
            )
            hi = float(np.max(alpha.alphas))
            p = lo + (hi - lo) * rng.uniform(0.05, 0.95)
            sol = min_vol_fixed_pnl_diag(alpha, p)
            ref = brute_force_min(alpha, cov, p)
            assert sol.risk == pytest.approx(ref.risk, rel=1e-9)
            np.testing.assert_allclose(sol.weights, ref.weights, atol=1e-8)

    def test_inactive_streams_below_threshold(self):
        rng = np.random.default_rng(25)
        for _ in range(50):
            alpha = random_diag_alpha(rng, 8)
            lo = float(
                np.sum(alpha.scaled_alphas**2)
                / np.dot(alpha.inv_vols, alpha.scaled_alphas)
            )
            hi = float(np.max(alpha.alphas))
            p = lo + (hi - lo) * rng.uniform(0.3, 0.95)
            sol = min_vol_fixed_pnl_diag(alpha, p)
            # Stationarity: active scaled weights are a fixed combination of
            # scaled alphas and inverse vols with multiplier coefficients.
            w_hat = alpha.vols * sol.weights
            for i in sol.support:
                recon = (
                    -sol.mu * alpha.inv_vols[i]
                    - sol.mu_tilde * alpha.scaled_alphas[i]
                )
                assert w_hat[i] == pytest.approx(recon, rel=1e-9, abs=1e-12)
            # Inactive streams fail the activation inequality.
            for j in sol.inactive:
                margin = (
                    -sol.mu * alpha.inv_vols[j]
                    - sol.mu_tilde * alpha.scaled_alphas[j]
                )
                assert margin <= 1e-10

    def test_frontier_monotone(self):
        rng = np.random.default_rng(26)
        alpha = random_diag_alpha(rng, 10)
        lo = float(
            np.sum(alpha.scaled_alphas**2)
            / np.dot(alpha.inv_vols, alpha.scaled_alphas)
        )
        hi = float(np.max(alpha.alphas))
        risks = [
            min_vol_fixed_pnl_diag(alpha, p).risk
            for p in np.linspace(lo, hi * (1 - 1e-9), 40)
        ]
        assert np.all(np.diff(risks) >= -1e-12)


class TestSphereAndTargetSearch:
    def test_sphere_fixture(self):
        sol = sphere_optimal(FIX, 3.3)
        ref = quasi_optimal(FIX, 3.3)
        assert sol.sharpe == pytest.approx(3.3, abs=1e-9)
        assert sol.pnl >= ref.pnl - 1e-12

    def test_sphere_near_max_sharpe(self):
        s_max = math.sqrt(14.0)
        sol = sphere_optimal(FIX, s_max * (1 - 1e-13))
        np.testing.assert_allclose(sol.weights, [0.5, 1 / 3, 1 / 6], atol=1e-9)

    def test_sphere_two_streams_matches_fixed_pnl_route(self):
        alpha = AlphaSet([2.0, 1.0], [1.0, 1.0])
        sol = sphere_optimal(alpha, 2.1)
        ref = sharpe_target_diag(alpha, 2.1)
        np.testing.assert_allclose(sol.weights, ref.weights, atol=1e-8)
        assert sol.sharpe == pytest.approx(2.1, abs=1e-9)

    def test_sharpe_target_fixture_endpoints(self):
        sol = sharpe_target_diag(FIX, math.sqrt(14.0))
        np.testing.assert_allclose(sol.weights, [0.5, 1 / 3, 1 / 6], atol=1e-10)
        assert sol.pnl == pytest.approx(7.0 / 3.0, rel=1e-10)

        sol = sharpe_target_diag(FIX, 2.8 / math.sqrt(0.68))
        np.testing.assert_allclose(sol.weights, [0.8, 0.2, 0.0], atol=1e-7)
        assert sol.pnl == pytest.approx(2.8, abs=1e-7)

        sol = sharpe_target_diag(FIX, 3.0)
        np.testing.assert_allclose(sol.weights, [1.0, 0.0, 0.0], atol=1e-12)
        assert sol.pnl == pytest.approx(3.0)

    def test_routes_agree_randomized(self):
        rng = np.random.default_rng(27)
        improved = 0
        for _ in range(150):
            n = int(rng.integers(2, 11))
            alpha = random_diag_alpha(rng, n)
            ahat = alpha.scaled_alphas
            s_single = ahat[int(np.argmax(alpha.alphas))]
            s_max = float(np.sqrt(np.sum(ahat**2)))
            s_star = s_single + (s_max - s_single) * rng.uniform(0.02, 0.98)
            a = sphere_optimal(alpha, s_star)
            b = sharpe_target_diag(alpha, s_star)
            q = quasi_optimal(alpha, s_star)
            np.testing.assert_allclose(
                a.weights, b.weights, atol=1e-8,
                err_msg=f"n={n} s_star={s_star}",
            )
            assert a.pnl >= q.pnl - 1e-9
            if a.pnl > q.pnl + 1e-9:
                improved += 1
        assert improved > 0
