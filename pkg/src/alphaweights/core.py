"""Domain types, portfolio statistics and covariance application.

Conventions used throughout the package:

* weights are signed and normalized so that ``sum(|w_i|) == 1``;
* all return-like quantities are per period (annualization is the caller's
  concern);
* ``pnl`` and ``risk`` on a :class:`WeightSolution` are per unit investment
  (P/I and R/I); :func:`portfolio_stats` scales them by an investment level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import (
    DegenerateWeights,
    DimensionMismatch,
    NotPositiveDefinite,
    SharpeUndefined,
)

#: Absolute threshold below which a normalized weight is treated as exactly
#: zero.  Active-set membership must be a discrete decision; the solvers
#: compare classification margins at ~1e-10, so this sits well below that.
ZERO_WEIGHT_TOL = 1e-12

#: Maximum absolute asymmetry accepted in a dense covariance before rejection.
SYMMETRY_TOL = 1e-12


def _readonly(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class AlphaSet:
    """Expected returns, volatilities and optional turnovers for N streams."""

    alphas: np.ndarray
    vols: np.ndarray
    turnovers: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "alphas", _readonly(np.atleast_1d(self.alphas)))
        object.__setattr__(self, "vols", _readonly(np.atleast_1d(self.vols)))
        if self.alphas.ndim != 1 or self.vols.ndim != 1:
            raise DimensionMismatch("alphas and vols must be 1-d")
        if self.alphas.shape != self.vols.shape:
            raise DimensionMismatch(
                f"{self.alphas.size} alphas vs {self.vols.size} vols"
            )
        if np.any(self.vols <= 0.0):
            raise ValueError("all volatilities must be strictly positive")
        if self.turnovers is not None:
            t = _readonly(np.atleast_1d(self.turnovers))
            if t.shape != self.alphas.shape:
                raise DimensionMismatch(
                    f"{t.size} turnovers for {self.alphas.size} streams"
                )
            if np.any(t < 0.0):
                raise ValueError("turnovers must be non-negative")
            object.__setattr__(self, "turnovers", t)

    @property
    def n(self) -> int:
        return self.alphas.size

    @property
    def inv_vols(self) -> np.ndarray:
        """1/sigma_i, the natural weighting of the diagonal-case algebra."""
        return 1.0 / self.vols

    @property
    def scaled_alphas(self) -> np.ndarray:
        """alpha_i / sigma_i, the per-stream Sharpe ratios."""
        return self.alphas / self.vols


@dataclass(frozen=True, eq=False)
class DenseCovariance:
    """Positive-definite N x N covariance given explicitly."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"covariance must be square, got {m.shape}")
        asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
        if asym > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(m))) if m.size else 1.0):
            raise NotPositiveDefinite(f"matrix asymmetry {asym:g} exceeds tolerance")
        m = 0.5 * (m + m.T)
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(
                "covariance is not positive-definite (factorization failed); "
                "repairing indefinite inputs is out of scope"
            ) from None
        object.__setattr__(self, "matrix", _readonly(m))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def kind(self) -> str:
        return "dense"

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise DimensionMismatch(f"vector of size {v.size} for N={self.n}")
        return self.matrix @ v

    def solve(self, v: np.ndarray) -> np.ndarray:
        """C^{-1} v."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise DimensionMismatch(f"vector of size {v.size} for N={self.n}")
        return np.linalg.solve(self.matrix, v)

    def densify(self) -> np.ndarray:
        return np.array(self.matrix)

    def correlation(self) -> np.ndarray:
        sd = np.sqrt(np.diag(self.matrix))
        return self.matrix / np.outer(sd, sd)


@dataclass(frozen=True, eq=False)
class FactorCovariance:
    """Covariance of the form diag(specific_var) + loadings @ factor_cov @ loadings.T.

    ``loaded`` caches loadings @ chol(factor_cov); every operation works with
    it so the full N x N matrix is never materialized.
    """

    specific_var: np.ndarray
    loadings: np.ndarray
    factor_cov: np.ndarray
    loaded: np.ndarray = field(init=False)

    def __post_init__(self):
        xi2 = np.atleast_1d(np.array(self.specific_var, dtype=float))
        om = np.array(self.loadings, dtype=float)
        if om.ndim == 1:
            om = om[:, None]
        phi = np.atleast_2d(np.array(self.factor_cov, dtype=float))
        if xi2.ndim != 1:
            raise DimensionMismatch("specific_var must be 1-d")
        if om.shape[0] != xi2.size:
            raise DimensionMismatch(
                f"loadings rows {om.shape[0]} vs {xi2.size} specific variances"
            )
        if phi.shape != (om.shape[1], om.shape[1]):
            raise DimensionMismatch(
                f"factor_cov {phi.shape} vs {om.shape[1]} loading columns"
            )
        if np.any(xi2 <= 0.0):
            raise NotPositiveDefinite("all specific variances must be positive")
        if np.max(np.abs(phi - phi.T), initial=0.0) > SYMMETRY_TOL * max(
            1.0, float(np.max(np.abs(phi)))
        ):
            raise NotPositiveDefinite("factor covariance is not symmetric")
        try:
            chol = np.linalg.cholesky(0.5 * (phi + phi.T))
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(
                "factor covariance is not positive-definite"
            ) from None
        object.__setattr__(self, "specific_var", _readonly(xi2))
        object.__setattr__(self, "loadings", _readonly(om))
        object.__setattr__(self, "factor_cov", _readonly(0.5 * (phi + phi.T)))
        object.__setattr__(self, "loaded", _readonly(om @ chol))

    @property
    def n(self) -> int:
        return self.specific_var.size

    @property
    def n_factors(self) -> int:
        return self.loaded.shape[1]

    @property
    def kind(self) -> str:
        return "factor"

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise DimensionMismatch(f"vector of size {v.size} for N={self.n}")
        return self.specific_var * v + self.loaded @ (self.loaded.T @ v)

    def solve(self, v: np.ndarray) -> np.ndarray:
        """C^{-1} v via the low-rank (Woodbury) identity, O(N F^2)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise DimensionMismatch(f"vector of size {v.size} for N={self.n}")
        u = v / self.specific_var
        q = np.eye(self.n_factors) + self.loaded.T @ (
            self.loaded / self.specific_var[:, None]
        )
        p = np.linalg.solve(q, self.loaded.T @ u)
        return u - (self.loaded @ p) / self.specific_var

    def densify(self) -> np.ndarray:
        return np.diag(self.specific_var) + self.loaded @ self.loaded.T

    def correlation(self) -> np.ndarray:
        dense = self.densify()
        sd = np.sqrt(np.diag(dense))
        return dense / np.outer(sd, sd)


CovarianceModel = Union[DenseCovariance, FactorCovariance]


@dataclass(frozen=True, eq=False)
class WeightSolution:
    """A normalized weight vector with its support, multipliers and stats.

    ``support`` lists the indices of the nonzero weights (0-based) and
    ``signs`` the corresponding +1/-1 signs.  ``mu`` and ``mu_tilde`` are the
    multipliers of the normalization and P&L constraints; they are ``None``
    for solutions that are not stationary points of that problem (e.g. the
    greedy quasi-optimal weights).  ``pnl`` and ``risk`` are per unit
    investment.
    """

    weights: np.ndarray
    support: tuple
    signs: tuple
    mu: Optional[float] = None
    mu_tilde: Optional[float] = None
    pnl: Optional[float] = None
    risk: Optional[float] = None
    sharpe: Optional[float] = None
    iterations: int = 0
    certified_global: bool = False
    converged: bool = True

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(np.atleast_1d(self.weights)))
        object.__setattr__(self, "support", tuple(int(i) for i in self.support))
        object.__setattr__(self, "signs", tuple(int(s) for s in self.signs))
        if len(self.support) != len(self.signs):
            raise DimensionMismatch("support and signs lengths differ")

    @property
    def n(self) -> int:
        return self.weights.size

    @property
    def inactive(self) -> tuple:
        """Indices of the exactly-zero weights."""
        on = set(self.support)
        return tuple(i for i in range(self.n) if i not in on)


@dataclass(frozen=True)
class PortfolioStats:
    """P&L, risk and Sharpe ratio at a given investment level."""

    pnl: float
    risk: float
    sharpe: float
    investment: float


def covariance_apply(cov: CovarianceModel, v: np.ndarray) -> np.ndarray:
    """Return C @ v for either covariance representation."""
    return cov.apply(v)


def validate_weights(w: np.ndarray, tol: float = ZERO_WEIGHT_TOL) -> WeightSolution:
    """Rescale ``w`` to unit L1 norm and extract support, complement and signs.

    Entries whose normalized magnitude is at most ``tol`` are snapped to exact
    zero (and the remainder renormalized).  Raises
    :class:`~alphaweights.errors.DegenerateWeights` for an all-zero input.

    The result is a skeleton: statistics and multipliers are left unset.
    """
    w = np.array(w, dtype=float)
    total = float(np.sum(np.abs(w)))
    if total <= 0.0:
        raise DegenerateWeights("cannot normalize an all-zero weight vector")
    w /= total
    w[np.abs(w) <= tol] = 0.0
    total = float(np.sum(np.abs(w)))
    if total <= 0.0:
        raise DegenerateWeights("all weights fell below the zero tolerance")
    w /= total
    support = tuple(int(i) for i in np.nonzero(w)[0])
    signs = tuple(int(np.sign(w[i])) for i in support)
    return WeightSolution(weights=w, support=support, signs=signs)


def portfolio_stats(
    weights,
    alpha: AlphaSet,
    cov: CovarianceModel,
    investment: float,
) -> PortfolioStats:
    """Compute P = I * sum(alpha_i w_i), R = I * sqrt(w' C w) and S = P/R.

    ``weights`` may be a :class:`WeightSolution` or a raw vector.  Raises
    :class:`~alphaweights.errors.SharpeUndefined` when risk is numerically
    zero while the P&L is not.
    """
    if investment <= 0.0:
        raise ValueError("investment level must be positive")
    w = weights.weights if isinstance(weights, WeightSolution) else np.asarray(
        weights, dtype=float
    )
    if w.shape != (alpha.n,) or cov.n != alpha.n:
        raise DimensionMismatch(
            f"weights size {w.size}, {alpha.n} streams, covariance N={cov.n}"
        )
    pnl = float(investment * np.dot(alpha.alphas, w))
    quad = float(np.dot(w, cov.apply(w)))
    risk = float(investment * math.sqrt(max(quad, 0.0)))
    if risk == 0.0:
        if pnl != 0.0:
            raise SharpeUndefined("risk is numerically zero with nonzero P&L")
        sharpe = 0.0
    else:
        sharpe = pnl / risk
    return PortfolioStats(pnl=pnl, risk=risk, sharpe=sharpe, investment=float(investment))
