"""Linear trading costs, nonlinear impact in linearized form, and capacity.

Linear costs enter the fixed-P&L problem by replacing each alpha with
``alpha_i - L_i * sign(w_i)`` and widening the support thresholds; the
iteration itself is unchanged.  The per-stream cost is ``L * rho * tau_i``
where ``rho`` is the turnover reduction from internal crossing, estimated
spectrally from the correlation matrix and recomputed on the surviving
support until the two agree.

Nonlinear impact (cost ~ Q/n * dollars-traded^n) is handled by linearizing
the turnover around its cross-sectional mean, which folds the impact into
effective linear costs plus a constant P&L offset.  The investment level
enters those effective costs, which is what makes capacity finite.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .core import AlphaSet, CovarianceModel, WeightSolution
from .errors import (
    BelowSharpeMaxPnl,
    CapacityExceeded,
    DimensionMismatch,
    InfeasibleTarget,
    MissingTurnovers,
    NoProfitableScale,
    NonConvergence,
    NotCorrelation,
    UnboundedCapacity,
)
from .factor import _solve_with_linear_costs

logger = logging.getLogger(__name__)

_MAX_RHO_ROUNDS = 50
_RHO_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class CostSpec:
    """Trading cost parameters.

    ``linear_rate`` is the all-in linear cost per unit dollar traded;
    ``impact_coeff`` and ``impact_exponent`` (> 1) shape the nonlinear term;
    ``investment`` is the dollar investment level the impact term scales
    with.  ``rho_star`` fixes the turnover-reduction coefficient; left unset
    it is estimated spectrally and re-estimated on the converged support.
    ``per_stream_override`` supplies the per-stream linear costs directly,
    superseding ``linear_rate * rho * tau_i``.
    """

    linear_rate: float = 0.0
    impact_coeff: float = 0.0
    impact_exponent: float = 2.0
    investment: Optional[float] = None
    rho_star: Optional[float] = None
    per_stream_override: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.linear_rate < 0.0:
            raise ValueError("linear_rate must be non-negative")
        if self.impact_coeff < 0.0:
            raise ValueError("impact_coeff must be non-negative")
        if self.impact_exponent <= 1.0:
            raise ValueError("impact_exponent must exceed 1")
        if self.investment is not None and self.investment <= 0.0:
            raise ValueError("investment level must be positive")
        if self.rho_star is not None and not 0.0 < self.rho_star <= 1.0:
            raise ValueError("rho_star must lie in (0, 1]")
        if self.per_stream_override is not None:
            v = np.atleast_1d(np.asarray(self.per_stream_override, dtype=float))
            if np.any(v < 0.0):
                raise ValueError("per-stream costs must be non-negative")
            object.__setattr__(self, "per_stream_override", v)

    def linear_costs(self, alpha: AlphaSet, rho: float) -> np.ndarray:
        """Per-stream linear costs at turnover reduction ``rho``."""
        if self.per_stream_override is not None:
            if self.per_stream_override.size != alpha.n:
                raise DimensionMismatch(
                    f"{self.per_stream_override.size} per-stream costs for "
                    f"{alpha.n} streams"
                )
            return self.per_stream_override
        if self.linear_rate == 0.0:
            return np.zeros(alpha.n)
        if alpha.turnovers is None:
            raise MissingTurnovers(
                "linear costs need per-stream turnovers (or an explicit "
                "per-stream override)"
            )
        return self.linear_rate * rho * alpha.turnovers


@dataclass(frozen=True, eq=False)
class SpectralInfo:
    """Top eigenpair of a correlation matrix and the implied turnover reduction."""

    psi1: float
    v1: np.ndarray
    rho_star: float


@dataclass(frozen=True, eq=False)
class ImpactLinearization:
    """Impact folded into effective linear costs around the mean turnover.

    ``eff_costs`` are the per-stream effective linear costs; ``pnl_shift`` is
    the constant P&L offset (Q' * tau_bar^n / n) that relates the true target
    to the equivalent plain-linear-cost target; ``qtilde_prime`` is the
    investment-scaled impact coefficient Q * rho^n * I^(n-1);
    ``spread_ratio`` reports std(tau - tau_bar) / tau_bar, the quantity the
    linearization assumes to be small.
    """

    tau_bar: float
    tau_dev: np.ndarray
    eff_costs: np.ndarray
    pnl_shift: float
    qtilde_prime: float
    spread_ratio: float


def rho_star(correlation: np.ndarray) -> SpectralInfo:
    """Estimate the turnover-reduction coefficient from a correlation matrix.

    Uses rho = psi1 / (N sqrt(N)) * |sum_i v_i| with the top eigenpair
    (psi1, v).  When the top eigenvalue is degenerate, v is chosen inside the
    top eigenspace to maximize |sum_i v_i| (the projection of the ones
    vector), which is basis-independent.  The result is clamped to (0, 1].
    """
    psi = np.atleast_2d(np.asarray(correlation, dtype=float))
    n = psi.shape[0]
    if psi.shape != (n, n):
        raise NotCorrelation(f"correlation must be square, got {psi.shape}")
    if np.max(np.abs(psi - psi.T), initial=0.0) > 1e-10:
        raise NotCorrelation("correlation matrix is not symmetric")
    if np.max(np.abs(np.diag(psi) - 1.0)) > 1e-12:
        raise NotCorrelation("correlation matrix must have a unit diagonal")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (psi + psi.T))
    if eigvals[0] < -1e-8 * max(1.0, eigvals[-1]):
        raise NotCorrelation(
            f"correlation matrix is not positive-semidefinite "
            f"(min eigenvalue {eigvals[0]:g})"
        )
    psi1 = float(eigvals[-1])
    top = eigvals >= psi1 * (1.0 - 1e-10)
    basis = eigvecs[:, top]
    coef = basis.T @ np.ones(n)
    norm = float(np.linalg.norm(coef))
    if norm > 1e-12:
        v1 = basis @ (coef / norm)
        col_sum = norm
    else:
        # Ones vector orthogonal to the whole top eigenspace.
        sums = np.abs(basis.sum(axis=0))
        v1 = basis[:, int(np.argmax(sums))]
        col_sum = float(np.max(sums))
    raw = psi1 / (n * math.sqrt(n)) * col_sum
    clamped = min(max(raw, _RHO_FLOOR), 1.0)
    if clamped != raw:
        logger.warning("turnover reduction %.3g clamped into (0, 1]", raw)
    return SpectralInfo(psi1=psi1, v1=v1, rho_star=clamped)


def _restricted_rho(correlation: np.ndarray, support) -> float:
    idx = np.fromiter(support, dtype=int)
    return rho_star(correlation[np.ix_(idx, idx)]).rho_star


def _resolve_rho(costs: CostSpec, cov, correlation) -> Tuple[float, bool]:
    """Initial turnover reduction and whether it is to be held fixed."""
    if costs.per_stream_override is not None:
        return 1.0, True
    if costs.rho_star is not None:
        return costs.rho_star, True
    if costs.linear_rate == 0.0 and costs.impact_coeff == 0.0:
        return 1.0, True
    corr = cov.correlation() if correlation is None else np.asarray(correlation)
    return rho_star(corr).rho_star, False


def _impact_terms(costs: CostSpec, alpha: AlphaSet, rho: float):
    """(qtilde_prime, tau_bar) for the current turnover reduction."""
    if alpha.turnovers is None:
        raise MissingTurnovers("impact costs need per-stream turnovers")
    if costs.investment is None:
        raise ValueError("impact costs need an investment level")
    tau_bar = float(np.mean(alpha.turnovers))
    qtp = (
        costs.impact_coeff
        * rho**costs.impact_exponent
        * costs.investment ** (costs.impact_exponent - 1.0)
    )
    return qtp, tau_bar


def impact_effective_costs(
    costs: CostSpec, alpha: AlphaSet, rho: Optional[float] = None
) -> ImpactLinearization:
    """Fold the impact term into effective per-stream linear costs.

    ``rho`` defaults to ``costs.rho_star`` and must be resolved one way or
    the other.  The effective cost adds Q * rho^n * I^(n-1) * tau_bar^(n-1)
    * tau_i to each stream's linear cost.
    """
    if rho is None:
        if costs.rho_star is None:
            raise ValueError(
                "resolve the turnover reduction first (set rho_star or pass rho)"
            )
        rho = costs.rho_star
    if alpha.turnovers is None:
        raise MissingTurnovers("impact costs need per-stream turnovers")
    qtp, tau_bar = _impact_terms(costs, alpha, rho)
    base = costs.linear_costs(alpha, rho)
    n_exp = costs.impact_exponent
    eff = base + qtp * tau_bar ** (n_exp - 1.0) * alpha.turnovers
    shift = qtp * tau_bar**n_exp / n_exp
    tau_dev = alpha.turnovers - tau_bar
    spread = float(np.std(tau_dev) / tau_bar) if tau_bar > 0.0 else 0.0
    if spread > 0.5:
        logger.warning(
            "turnover spread ratio %.3g is large; the impact linearization "
            "may be inaccurate",
            spread,
        )
    return ImpactLinearization(
        tau_bar=tau_bar,
        tau_dev=tau_dev,
        eff_costs=eff,
        pnl_shift=shift,
        qtilde_prime=qtp,
        spread_ratio=spread,
    )


def _smax_with_costs(alpha: AlphaSet, cov, li: np.ndarray):
    """Maximum-Sharpe point of the cost-adjusted problem.

    Self-consistent signs for w ~ C^{-1}(alpha - L * sign(w)); returns
    (weights, effective P&L).  On a sign cycle the iterate with the best
    effective P&L is used (logged).
    """
    alphas = alpha.alphas
    eta = np.where(alphas >= 0.0, 1.0, -1.0)
    seen = set()
    best = None
    for _ in range(100):
        key = eta.tobytes()
        if key in seen:
            logger.debug("sign cycle in the cost-adjusted max-Sharpe point")
            break
        seen.add(key)
        t = cov.solve(alphas - li * eta)
        total = float(np.sum(np.abs(t)))
        if total <= 0.0:
            break
        w = t / total
        p_eff = float(np.dot(alphas, w) - np.dot(li, np.abs(w)))
        if best is None or p_eff > best[1]:
            best = (w, p_eff)
        new_eta = np.where(t >= 0.0, 1.0, -1.0)
        if np.array_equal(new_eta, eta):
            return w, p_eff
        eta = new_eta
    if best is None:
        raise CapacityExceeded("cost-adjusted alphas vanish identically")
    return best


def _effective_setup(costs: CostSpec, alpha: AlphaSet, rho: float, p_tilde: float):
    """Per-stream costs and effective target at the given turnover reduction.

    With impact the effective target absorbs both the constant impact offset
    and the mean-turnover part folded into the effective costs:
    p_eff = p_tilde - (1 - 1/n) * Q' * tau_bar^n.
    """
    if costs.impact_coeff > 0.0:
        lin = impact_effective_costs(costs, alpha, rho)
        li = lin.eff_costs
        back = lin.qtilde_prime * lin.tau_bar**costs.impact_exponent - lin.pnl_shift
        return li, p_tilde - back, back
    return costs.linear_costs(alpha, rho), p_tilde, 0.0


def _cost_engine(
    alpha: AlphaSet,
    cov: CovarianceModel,
    costs: CostSpec,
    p_tilde: float,
    correlation=None,
    eta0=None,
    max_iterations=500,
) -> WeightSolution:
    """Solve at fixed P&L with costs, re-estimating the turnover reduction
    on the surviving support until it is self-consistent."""
    rho, fixed = _resolve_rho(costs, cov, correlation)
    corr = None
    if not fixed:
        corr = cov.correlation() if correlation is None else np.asarray(correlation)
    support_used = frozenset(range(alpha.n))

    for round_ in range(1, _MAX_RHO_ROUNDS + 1):
        li, p_eff, back = _effective_setup(costs, alpha, rho, p_tilde)
        if costs.impact_coeff > 0.0 and np.all(li >= np.abs(alpha.alphas)):
            raise CapacityExceeded(
                "effective costs reach every |alpha|; P&L cannot be positive "
                "at this investment level"
            )
        _, p_star_eff = _smax_with_costs(alpha, cov, li)
        if p_eff < p_star_eff - 1e-12 * max(1.0, abs(p_star_eff)):
            raise BelowSharpeMaxPnl(
                f"cost-adjusted target {p_eff:g} is below the cost-adjusted "
                f"maximum-Sharpe P&L {p_star_eff:g}"
            )
        p_max_eff = float(np.max(np.abs(alpha.alphas) - li))
        if p_eff >= p_max_eff:
            raise InfeasibleTarget(
                f"cost-adjusted target {p_eff:g} is not below the attainable "
                f"maximum {p_max_eff:g}"
            )
        sol = _solve_with_linear_costs(
            alpha, cov, p_eff, li, eta0=eta0, max_iterations=max_iterations
        )
        if fixed:
            return _rebase(sol, p_tilde, back)
        support = frozenset(sol.support)
        if support == support_used:
            return _rebase(sol, p_tilde, back)
        rho = _restricted_rho(corr, support)
        support_used = support
        logger.debug(
            "round %d: turnover reduction re-estimated to %.6g on %d streams",
            round_,
            rho,
            len(support),
        )
    raise NonConvergence(
        f"turnover-reduction support did not stabilize in {_MAX_RHO_ROUNDS} rounds"
    )


def _rebase(sol: WeightSolution, p_tilde: float, back: float) -> WeightSolution:
    """Report the true target P&L on an impact solution (offset is constant)."""
    if back == 0.0:
        return sol
    return WeightSolution(
        weights=sol.weights,
        support=sol.support,
        signs=sol.signs,
        mu=sol.mu,
        mu_tilde=sol.mu_tilde,
        pnl=p_tilde,
        risk=sol.risk,
        sharpe=p_tilde / sol.risk if sol.risk > 0.0 else 0.0,
        iterations=sol.iterations,
        certified_global=sol.certified_global,
        converged=sol.converged,
    )


def linear_cost_solve(
    alpha: AlphaSet,
    cov: CovarianceModel,
    costs: CostSpec,
    p_tilde: float,
    correlation=None,
    eta0=None,
    max_iterations=500,
) -> WeightSolution:
    """Minimum-risk weights at fixed cost-adjusted P&L with linear costs.

    ``p_tilde`` is net of linear costs: sum(alpha_i w_i - L_i |w_i|).  The
    turnover reduction is re-estimated on the converged support unless fixed
    via ``costs.rho_star`` or a per-stream override.  ``certified_global``
    requires mu >= mu_tilde * L_i for every stream.
    """
    spec = CostSpec(
        linear_rate=costs.linear_rate,
        impact_coeff=0.0,
        impact_exponent=costs.impact_exponent,
        investment=costs.investment,
        rho_star=costs.rho_star,
        per_stream_override=costs.per_stream_override,
    )
    return _cost_engine(
        alpha, cov, spec, p_tilde, correlation, eta0, max_iterations
    )


def impact_solve(
    alpha: AlphaSet,
    cov: CovarianceModel,
    costs: CostSpec,
    p_tilde: float,
    correlation=None,
    eta0=None,
    max_iterations=500,
) -> WeightSolution:
    """Minimum-risk weights at fixed P&L including linearized impact.

    ``p_tilde`` is net of linear costs and of the linearized impact term.
    Internally the impact becomes effective linear costs plus a constant
    offset, so the solve delegates to the linear-cost machinery at a shifted
    target; the reported P&L is rebased to ``p_tilde``.  Raises
    :class:`~alphaweights.errors.CapacityExceeded` when the effective costs
    swamp every alpha.
    """
    if costs.impact_coeff == 0.0:
        return linear_cost_solve(
            alpha, cov, costs, p_tilde, correlation, eta0, max_iterations
        )
    return _cost_engine(
        alpha, cov, costs, p_tilde, correlation, eta0, max_iterations
    )


def cost_solve_at(
    alpha: AlphaSet, cov: CovarianceModel, costs: CostSpec, p_tilde: float
) -> WeightSolution:
    """Dispatch to the impact or linear-cost solver."""
    if costs.impact_coeff > 0.0:
        return impact_solve(alpha, cov, costs, p_tilde)
    return linear_cost_solve(alpha, cov, costs, p_tilde)


def cost_solve_bounds(
    alpha: AlphaSet, cov: CovarianceModel, costs: CostSpec, correlation=None
) -> Tuple[float, float]:
    """Valid target range (maximum-Sharpe P&L, supremum P&L) with costs.

    Computed at the initial turnover reduction; targets are in the same
    (true) units as the solvers' ``p_tilde``.
    """
    rho, _ = _resolve_rho(costs, cov, correlation)
    li, _, back = _effective_setup(costs, alpha, rho, 0.0)
    _, p_star_eff = _smax_with_costs(alpha, cov, li)
    p_max_eff = float(np.max(np.abs(alpha.alphas) - li))
    return p_star_eff + back, p_max_eff + back


def capacity_search(
    alpha: AlphaSet,
    cov: CovarianceModel,
    costs: CostSpec,
    i_range: Tuple[float, float],
    correlation=None,
    rel_tol: float = 1e-6,
) -> Tuple[float, float]:
    """Investment level maximizing the optimized P&L under impact.

    At each investment level the weights are re-optimized at the
    maximum-Sharpe point of the cost-adjusted problem and the P&L is
    evaluated with the exact (not linearized) impact term.  A 32-point scan
    guards unimodality before golden-section refinement (falling back to a
    dense grid when violated).  Returns ``(i_star, pnl_at_star)`` in currency
    units.
    """
    if costs.impact_coeff <= 0.0:
        raise UnboundedCapacity(
            "capacity is unbounded without a nonlinear impact term"
        )
    i_min, i_max = float(i_range[0]), float(i_range[1])
    if not 0.0 < i_min < i_max:
        raise ValueError(f"invalid investment range ({i_min:g}, {i_max:g})")
    if alpha.turnovers is None:
        raise MissingTurnovers("capacity search needs per-stream turnovers")
    rho, _ = _resolve_rho(costs, cov, correlation)
    li_base = costs.linear_costs(alpha, rho)
    tau = alpha.turnovers
    tau_bar = float(np.mean(tau))
    n_exp = costs.impact_exponent

    def pnl_at(level: float) -> float:
        qtp = costs.impact_coeff * rho**n_exp * level ** (n_exp - 1.0)
        li_eff = li_base + qtp * tau_bar ** (n_exp - 1.0) * tau
        try:
            w, _ = _smax_with_costs(alpha, cov, li_eff)
        except CapacityExceeded:
            return -math.inf
        gross = float(np.dot(alpha.alphas, w) - np.dot(li_base, np.abs(w)))
        impact = qtp / n_exp * float(np.dot(tau, np.abs(w))) ** n_exp
        return level * (gross - impact)

    grid = np.linspace(i_min, i_max, 32)
    values = np.array([pnl_at(x) for x in grid])
    k = int(np.argmax(values))
    diffs = np.diff(values)
    rising = diffs > 1e-12 * np.maximum(1.0, np.abs(values[:-1]))
    if np.any(rising[k:]):
        logger.warning(
            "optimized P&L is not unimodal on the scan grid; widening to a "
            "dense grid search"
        )
        grid = np.linspace(i_min, i_max, 4096)
        values = np.array([pnl_at(x) for x in grid])
        k = int(np.argmax(values))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    i_star, best = _golden_max(pnl_at, lo, hi, rel_tol)
    if best <= 0.0:
        raise NoProfitableScale(
            f"optimized P&L is non-positive over [{i_min:g}, {i_max:g}] "
            f"(best {best:g} at investment {i_star:g})"
        )
    return i_star, best


def _golden_max(f, a: float, b: float, rel_tol: float) -> Tuple[float, float]:
    """Golden-section maximization of a unimodal function on [a, b]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    invphi2 = invphi * invphi
    h = b - a
    c, d = a + invphi2 * h, a + invphi * h
    fc, fd = f(c), f(d)
    while h > rel_tol * max(1.0, abs(a), abs(b)) * 1e-1:
        if fc >= fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + invphi2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + invphi * h
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)
