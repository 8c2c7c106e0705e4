"""Optimal capital weights for alpha streams on a shared execution platform.

The public API mirrors the module layout:

* :mod:`~alphaweights.core` -- domain types, portfolio statistics;
* :mod:`~alphaweights.diagonal` -- closed forms and searches for diagonal
  covariance;
* :mod:`~alphaweights.factor` -- signed-weight fixed-P&L solvers (factor and
  dense covariance) and target searches;
* :mod:`~alphaweights.costs` -- linear costs, impact linearization, turnover
  reduction, capacity;
* :mod:`~alphaweights.oracle` -- exhaustive verification at small N;
* :mod:`~alphaweights.synthetic` -- eigenportfolio diagnostics;
* :mod:`~alphaweights.panel` -- CSV panels, moment estimation, factor-model
  construction.
"""

from . import errors
from .core import (
    AlphaSet,
    CovarianceModel,
    DenseCovariance,
    FactorCovariance,
    PortfolioStats,
    WeightSolution,
    covariance_apply,
    portfolio_stats,
    validate_weights,
)
from .costs import (
    CostSpec,
    ImpactLinearization,
    SpectralInfo,
    capacity_search,
    impact_effective_costs,
    impact_solve,
    linear_cost_solve,
    rho_star,
)
from .diagonal import (
    GreedyOrder,
    greedy_sort,
    min_vol_fixed_pnl_diag,
    quasi_optimal,
    sharpe_target_diag,
    sphere_optimal,
)
from .factor import (
    check_optimality,
    smax_solution,
    solve_fixed_pnl,
    solve_fixed_pnl_any,
    solve_fixed_pnl_dense,
    target_search,
)
from .oracle import CertificationReport, brute_force_min, certify
from .panel import (
    TimeSeriesPanel,
    build_factor_model,
    estimate_moments,
    load_panel,
    save_panel,
)
from .synthetic import SyntheticBasis, synthetic_portfolios

__version__ = "0.1.0"

__all__ = [
    "AlphaSet",
    "CertificationReport",
    "CostSpec",
    "CovarianceModel",
    "DenseCovariance",
    "FactorCovariance",
    "GreedyOrder",
    "ImpactLinearization",
    "PortfolioStats",
    "SpectralInfo",
    "SyntheticBasis",
    "TimeSeriesPanel",
    "WeightSolution",
    "brute_force_min",
    "build_factor_model",
    "capacity_search",
    "certify",
    "check_optimality",
    "covariance_apply",
    "errors",
    "estimate_moments",
    "greedy_sort",
    "impact_effective_costs",
    "impact_solve",
    "linear_cost_solve",
    "load_panel",
    "min_vol_fixed_pnl_diag",
    "portfolio_stats",
    "quasi_optimal",
    "rho_star",
    "save_panel",
    "sharpe_target_diag",
    "smax_solution",
    "solve_fixed_pnl",
    "solve_fixed_pnl_any",
    "solve_fixed_pnl_dense",
    "sphere_optimal",
    "synthetic_portfolios",
    "target_search",
    "validate_weights",
]
