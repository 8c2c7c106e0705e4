"""Fixed-P&L minimum-risk solvers with signed weights.

The L1 normalization makes the first-order conditions piecewise linear: given
the support J (nonzero weights) and their signs, the multipliers and weights
come from one small linear solve; given multipliers, the support and signs
come from a threshold test.  Alternating the two is a finite procedure that,
whenever the normalization multiplier ``mu`` ends up non-negative, lands on
the certified global optimum.

For a factor covariance the linear system is (F+2)-dimensional regardless of
N; for a general dense covariance it is (|J|+2)-dimensional and convergence
is not guaranteed, so cycles are detected and reported.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional

import numpy as np

from .core import (
    AlphaSet,
    CovarianceModel,
    DenseCovariance,
    FactorCovariance,
    WeightSolution,
    ZERO_WEIGHT_TOL,
)
from .errors import (
    BelowSharpeMaxPnl,
    DegenerateInput,
    DimensionMismatch,
    InfeasibleTarget,
    NonConvergence,
    SingularSystem,
)
from .oracle import CertificationReport, certify

logger = logging.getLogger(__name__)

DEFAULT_MAX_ITERATIONS = 500

#: Streams whose classification margin is within this band of the threshold
#: are assigned to the zero-weight set, making the discrete decision
#: deterministic at the boundary.
_BOUNDARY_TOL = 1e-12

#: Fraction of max|alpha| kept away from the upper end of the P&L range,
#: where the support degenerates to a single stream and the system turns
#: singular.
_UPPER_MARGIN = 1e-9


def _initial_signs(alphas: np.ndarray, eta0) -> np.ndarray:
    if eta0 is None:
        return np.where(alphas >= 0.0, 1.0, -1.0)
    eta = np.asarray(eta0, dtype=float)
    if eta.shape != alphas.shape or not np.all(np.abs(eta) == 1.0):
        raise DimensionMismatch("eta0 must be a vector of +-1 per stream")
    return eta.copy()


def _classify(z: np.ndarray, mu: float, mu_tilde: float, li) -> tuple:
    """Support mask and signs from the threshold conditions.

    A stream is active when |mu_tilde * alpha_i + (C w)_i off-diagonal part|
    exceeds its threshold mu - mu_tilde * L_i; boundary cases go to the
    zero-weight set.
    """
    thr = mu if li is None else mu - mu_tilde * li
    mask = (np.abs(z) - thr) > _BOUNDARY_TOL
    eta = np.where(z > 0.0, -1.0, 1.0)
    return mask, eta


def _finalize(alpha, cov, w, mu, mu_tilde, iterations, li, converged):
    """Normalize, snap zeros, attach statistics and the certification flag."""
    w = np.array(w)
    w[np.abs(w) <= ZERO_WEIGHT_TOL] = 0.0
    total = float(np.sum(np.abs(w)))
    if total <= 0.0:
        raise SingularSystem("iteration produced an all-zero weight vector")
    w /= total
    support = tuple(int(i) for i in np.nonzero(w)[0])
    signs = tuple(int(np.sign(w[i])) for i in support)
    pnl = float(np.dot(alpha.alphas, w))
    if li is not None:
        pnl -= float(np.dot(li, np.abs(w)))
    risk = float(math.sqrt(max(np.dot(w, cov.apply(w)), 0.0)))
    if li is None:
        certified = converged and mu >= -1e-12
    else:
        certified = converged and mu >= float(np.max(mu_tilde * li)) - 1e-10
    return WeightSolution(
        weights=w,
        support=support,
        signs=signs,
        mu=float(mu),
        mu_tilde=float(mu_tilde),
        pnl=pnl,
        risk=risk,
        sharpe=pnl / risk if risk > 0.0 else 0.0,
        iterations=iterations,
        certified_global=bool(certified),
        converged=converged,
    )


def _run_iteration(
    alpha: AlphaSet,
    cov: CovarianceModel,
    p_tilde: float,
    solve_state: Callable,
    li: Optional[np.ndarray],
    eta0,
    max_iterations: int,
):
    """Shared alternation loop with exact-repeat convergence and cycle detection.

    ``solve_state(mask, eta)`` returns (w_full, z_full, mu, mu_tilde) for the
    given support/sign state.  Convergence is an exact repeat of the discrete
    state (the continuous quantities then repeat identically because the same
    linear system is solved).
    """
    n = alpha.n
    eta = _initial_signs(alpha.alphas, eta0)
    mask = np.ones(n, dtype=bool)
    seen = {}
    best = None  # (risk_sq, w, mu, mu_tilde, iterations)

    for it in range(1, max_iterations + 1):
        key = (mask.tobytes(), (eta * mask).tobytes())
        if key in seen:
            logger.warning(
                "support/sign cycle after %d iterations (first seen at %d)",
                it - 1,
                seen[key],
            )
            break
        seen[key] = it
        if not mask.any():
            break
        w, z, mu, mu_tilde = solve_state(mask, eta)
        risk_sq = max(-mu - mu_tilde * p_tilde, 0.0)
        if best is None or risk_sq < best[0]:
            best = (risk_sq, w, mu, mu_tilde, it)
        new_mask, new_eta = _classify(z, mu, mu_tilde, li)
        same = bool(
            np.array_equal(new_mask, mask)
            and np.array_equal(new_eta[new_mask], eta[new_mask])
        )
        eta = new_eta
        mask = new_mask
        if same:
            return _finalize(alpha, cov, w, mu, mu_tilde, it, li, True)

    if best is None:
        raise SingularSystem("no usable iterate was produced")
    _, w, mu, mu_tilde, it = best
    flagged = _finalize(alpha, cov, w, mu, mu_tilde, it, li, False)
    raise NonConvergence(
        f"no exact fixed point within {max_iterations} iterations "
        f"(best iterate risk {flagged.risk:.6g} returned via .best)",
        best=flagged,
    )


def _factor_state_solver(alpha, cov: FactorCovariance, p_tilde, li):
    alphas = alpha.alphas
    xi2 = cov.specific_var
    loaded = cov.loaded
    n, f = loaded.shape

    def solve_state(mask, eta):
        a_eff = alphas if li is None else alphas - li * eta
        inv_xi2 = np.where(mask, 1.0 / xi2, 0.0)
        lw = loaded * inv_xi2[:, None]
        q = np.eye(f) + loaded.T @ lw
        a_vec = lw.T @ eta
        b_vec = lw.T @ a_eff
        c = float(np.sum(inv_xi2))
        d = float(np.sum(a_eff * eta * inv_xi2))
        e = float(np.sum(a_eff * a_eff * inv_xi2))
        m = np.empty((f + 2, f + 2))
        m[:f, :f] = q
        m[:f, f] = a_vec
        m[f, :f] = a_vec
        m[:f, f + 1] = b_vec
        m[f + 1, :f] = b_vec
        m[f, f] = c
        m[f, f + 1] = m[f + 1, f] = d
        m[f + 1, f + 1] = e
        y = np.zeros(f + 2)
        y[f] = -1.0
        y[f + 1] = -p_tilde
        try:
            x = np.linalg.solve(m, y)
        except np.linalg.LinAlgError:
            raise SingularSystem(
                f"factor system singular on a support of size {int(mask.sum())}"
            ) from None
        v, mu, mu_tilde = x[:f], float(x[f]), float(x[f + 1])
        w = np.where(
            mask, -(mu * eta + mu_tilde * a_eff + loaded @ v) / xi2, 0.0
        )
        z = mu_tilde * alphas + loaded @ v
        return w, z, mu, mu_tilde

    return solve_state


def _dense_state_solver(alpha, cov: DenseCovariance, p_tilde, li):
    alphas = alpha.alphas
    c_mat = cov.matrix
    diag = np.diag(c_mat)

    def solve_state(mask, eta):
        idx = np.nonzero(mask)[0]
        k = idx.size
        eta_j = eta[idx]
        a_eff = alphas[idx] if li is None else alphas[idx] - li[idx] * eta_j
        diag_j = diag[idx]
        q = c_mat[np.ix_(idx, idx)] / diag_j[None, :]
        a_col = q @ eta_j - eta_j
        b_col = q @ a_eff - a_eff
        a_row = eta_j / diag_j
        b_row = a_eff / diag_j
        c = float(np.sum(1.0 / diag_j))
        d = float(np.sum(a_eff * eta_j / diag_j))
        e = float(np.sum(a_eff * a_eff / diag_j))
        m = np.empty((k + 2, k + 2))
        m[:k, :k] = q
        m[:k, k] = a_col
        m[:k, k + 1] = b_col
        m[k, :k] = a_row
        m[k + 1, :k] = b_row
        m[k, k] = c
        m[k, k + 1] = m[k + 1, k] = d
        m[k + 1, k + 1] = e
        y = np.zeros(k + 2)
        y[k] = -1.0
        y[k + 1] = -p_tilde
        try:
            x = np.linalg.solve(m, y)
        except np.linalg.LinAlgError:
            raise SingularSystem(
                f"dense system singular on a support of size {k}"
            ) from None
        v_j, mu, mu_tilde = x[:k], float(x[k]), float(x[k + 1])
        w = np.zeros(alphas.size)
        w[idx] = -(mu * eta_j + mu_tilde * a_eff + v_j) / diag_j
        # Off-diagonal part of C w doubles as the classification vector for
        # active and inactive streams alike.
        z = mu_tilde * alphas + c_mat @ w - diag * w
        return w, z, mu, mu_tilde

    return solve_state


def smax_solution(alpha: AlphaSet, cov: CovarianceModel):
    """Maximum-Sharpe weights, the left end of the valid P&L range.

    Returns ``(solution, s_max, p_star)`` where the weights are proportional
    to C^{-1} alpha under unit L1 norm, ``s_max = sqrt(alpha' C^{-1} alpha)``
    and ``p_star`` is the per-unit P&L of that portfolio.  The solution has
    ``mu = 0`` exactly.
    """
    if cov.n != alpha.n:
        raise DimensionMismatch(f"covariance N={cov.n} for {alpha.n} streams")
    t = cov.solve(alpha.alphas)
    d_t = float(np.sum(np.abs(t)))
    e_t = float(np.dot(alpha.alphas, t))
    if d_t <= 0.0 or e_t <= 0.0:
        raise DegenerateInput("alphas are identically zero")
    w = t / d_t
    s_max = math.sqrt(e_t)
    p_star = e_t / d_t
    sol = _finalize(alpha, cov, w, 0.0, -1.0 / d_t, 0, None, True)
    return sol, s_max, p_star


def _validate_range(p_tilde, p_star, p_max):
    if p_tilde < p_star - 1e-12 * max(1.0, abs(p_star)):
        raise BelowSharpeMaxPnl(
            f"target {p_tilde:g} is below the maximum-Sharpe P&L {p_star:g}; "
            "lower targets are dominated"
        )
    if p_tilde >= p_max:
        raise InfeasibleTarget(
            f"target {p_tilde:g} is not below the attainable maximum {p_max:g}"
        )


def solve_fixed_pnl(
    alpha: AlphaSet,
    cov: FactorCovariance,
    p_tilde: float,
    eta0: Optional[np.ndarray] = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> WeightSolution:
    """Minimum-risk signed weights at fixed per-unit P&L, factor covariance.

    The iteration starts from the full support with signs taken from the
    alphas (``eta0`` overrides) and terminates at an exact discrete fixed
    point.  ``certified_global`` is set when the normalization multiplier is
    non-negative, which makes the local optimum provably global.
    """
    if not isinstance(cov, FactorCovariance):
        raise TypeError("solve_fixed_pnl requires a factor covariance; "
                        "use solve_fixed_pnl_dense for dense inputs")
    _, _, p_star = smax_solution(alpha, cov)
    _validate_range(p_tilde, p_star, float(np.max(np.abs(alpha.alphas))))
    solver = _factor_state_solver(alpha, cov, p_tilde, None)
    return _run_iteration(alpha, cov, p_tilde, solver, None, eta0, max_iterations)


def solve_fixed_pnl_dense(
    alpha: AlphaSet,
    cov: DenseCovariance,
    p_tilde: float,
    eta0: Optional[np.ndarray] = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> WeightSolution:
    """Minimum-risk signed weights at fixed per-unit P&L, dense covariance.

    Same alternation as the factor case but with a (|J|+2)-dimensional
    non-symmetric system; convergence is not guaranteed in general, so a
    detected cycle raises :class:`~alphaweights.errors.NonConvergence`
    carrying the lowest-risk iterate.
    """
    if not isinstance(cov, DenseCovariance):
        raise TypeError("solve_fixed_pnl_dense requires a dense covariance")
    _, _, p_star = smax_solution(alpha, cov)
    _validate_range(p_tilde, p_star, float(np.max(np.abs(alpha.alphas))))
    solver = _dense_state_solver(alpha, cov, p_tilde, None)
    return _run_iteration(alpha, cov, p_tilde, solver, None, eta0, max_iterations)


def solve_fixed_pnl_any(
    alpha: AlphaSet,
    cov: CovarianceModel,
    p_tilde: float,
    eta0: Optional[np.ndarray] = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> WeightSolution:
    """Dispatch to the factor or dense solver based on the covariance kind."""
    if isinstance(cov, FactorCovariance):
        return solve_fixed_pnl(alpha, cov, p_tilde, eta0, max_iterations)
    return solve_fixed_pnl_dense(alpha, cov, p_tilde, eta0, max_iterations)


def _solve_with_linear_costs(
    alpha: AlphaSet,
    cov: CovarianceModel,
    p_tilde: float,
    li: np.ndarray,
    eta0: Optional[np.ndarray] = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> WeightSolution:
    """Cost-adjusted alternation used by the costs module.

    ``p_tilde`` is the cost-adjusted target; range validation is the
    caller's responsibility because the valid range depends on the costs.
    """
    li = np.asarray(li, dtype=float)
    if li.shape != (alpha.n,):
        raise DimensionMismatch(f"{li.size} cost entries for {alpha.n} streams")
    if isinstance(cov, FactorCovariance):
        solver = _factor_state_solver(alpha, cov, p_tilde, li)
    else:
        solver = _dense_state_solver(alpha, cov, p_tilde, li)
    return _run_iteration(alpha, cov, p_tilde, solver, li, eta0, max_iterations)


def target_search(
    alpha: AlphaSet,
    cov: CovarianceModel,
    sharpe_min: Optional[float] = None,
    risk_max: Optional[float] = None,
    costs=None,
    rel_tol: float = 1e-8,
    max_bisections: int = 200,
) -> WeightSolution:
    """Maximum-P&L solution subject to a Sharpe floor or a risk cap.

    Exactly one of ``sharpe_min`` / ``risk_max`` must be given.  Both Sharpe
    (nonincreasing) and risk (nondecreasing) are monotone along the P&L range,
    so the boundary solution is found by bisection to ``rel_tol`` relative
    accuracy.  Targets slacker than the upper end of the range return the
    near-maximal-P&L solution; infeasible targets raise
    :class:`~alphaweights.errors.InfeasibleTarget`.  With a
    :class:`~alphaweights.costs.CostSpec` the cost-adjusted solvers are used.
    """
    if (sharpe_min is None) == (risk_max is None):
        raise ValueError("specify exactly one of sharpe_min or risk_max")

    if costs is not None:
        from .costs import cost_solve_bounds, cost_solve_at

        p_star, p_max = cost_solve_bounds(alpha, cov, costs)
        evaluate = lambda p: cost_solve_at(alpha, cov, costs, p)
    else:
        _, _, p_star = smax_solution(alpha, cov)
        p_max = float(np.max(np.abs(alpha.alphas)))
        evaluate = lambda p: solve_fixed_pnl_any(alpha, cov, p)

    p_hi = p_star + (p_max - p_star) * (1.0 - _UPPER_MARGIN)
    base = evaluate(p_star)
    if sharpe_min is not None:
        target = float(sharpe_min)
        if target <= 0.0:
            raise InfeasibleTarget("Sharpe floor must be positive")
        s_max = base.sharpe
        if target > s_max * (1.0 + 1e-10):
            raise InfeasibleTarget(
                f"Sharpe floor {target:g} exceeds the maximum {s_max:g}"
            )
        if target >= s_max * (1.0 - 1e-10):
            return base
        measure = lambda sol: sol.sharpe
        decreasing = True
    else:
        target = float(risk_max)
        r_min = base.risk
        if target < r_min * (1.0 - rel_tol):
            raise InfeasibleTarget(
                f"risk cap {target:g} is below the maximum-Sharpe risk {r_min:g}"
            )
        if target <= r_min * (1.0 + 1e-10):
            return base
        measure = lambda sol: sol.risk
        decreasing = False

    top = evaluate(p_hi)
    slack_at_top = (
        measure(top) >= target if decreasing else measure(top) <= target
    )
    if slack_at_top:
        return top

    lo, hi = p_star, p_hi
    best = base
    for _ in range(max_bisections):
        mid = 0.5 * (lo + hi)
        sol = evaluate(mid)
        best = sol
        if abs(measure(sol) - target) <= rel_tol * max(abs(target), 1e-30):
            break
        # Move toward higher P&L while the constraint still has slack.
        has_slack = measure(sol) > target if decreasing else measure(sol) < target
        if has_slack:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return best


def check_optimality(
    sol: WeightSolution, alpha: AlphaSet, cov: CovarianceModel
) -> CertificationReport:
    """Verify stationarity, the inactive-stream bounds and the sign of ``mu``."""
    return certify(sol, alpha, cov, costs=None)
