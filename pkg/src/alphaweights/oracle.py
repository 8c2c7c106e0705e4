"""Exhaustive ground-truth solver and optimality certification.

``brute_force_min`` enumerates every support/sign pattern (3^N - 1 of them)
for the fixed-P&L minimum-risk problem under sum(|w|) = 1 and returns the
feasible stationary pattern with the smallest risk.  It exists to verify the
iterative solvers at small N, not to replace them.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AlphaSet, CovarianceModel, DenseCovariance, WeightSolution
from .errors import DimensionMismatch, InfeasibleTarget

logger = logging.getLogger(__name__)

#: 3^12 ~ 5.3e5 patterns is the largest enumeration we allow.
MAX_ORACLE_STREAMS = 12

_CONSTRAINT_TOL = 1e-9
_RISK_TIE_TOL = 1e-12


@dataclass(frozen=True)
class CertificationReport:
    """Per-condition diagnostics for a candidate solution.

    ``stationarity_residual`` is the largest violation of the first-order
    conditions on the active set; ``inactive_margin`` is the largest amount by
    which an inactive stream exceeds its multiplier bound (negative means all
    bounds hold); ``identity_gap`` is |risk^2 + mu + mu_tilde * pnl|.
    """

    stationarity_residual: float
    stationarity_ok: bool
    inactive_margin: float
    inactive_ok: bool
    identity_gap: float
    identity_ok: bool
    mu: float
    certified_global: bool

    @property
    def all_ok(self) -> bool:
        return self.stationarity_ok and self.inactive_ok and self.identity_ok


def _pattern_solution(alpha_eff, cov_mat, eta, idx, p_tilde):
    """Solve the stationarity system for one support/sign pattern.

    Returns (w_on_support, mu, mu_tilde, risk) or None when the restricted
    covariance or the constraint pair is singular for this pattern.
    """
    if len(idx) == 1:
        # Single-stream corner: the normalization fixes w = eta outright and
        # the pattern is feasible only if the P&L lands on target.  The
        # multiplier pair is not unique there; report the mu = 0
        # representative, which satisfies stationarity exactly.
        pnl = alpha_eff[0] * eta[0]
        if abs(pnl - p_tilde) > _CONSTRAINT_TOL * max(1.0, abs(p_tilde)):
            return None
        if pnl == 0.0:
            return None
        c_ii = cov_mat[idx[0], idx[0]]
        return eta.copy(), 0.0, -c_ii / pnl, math.sqrt(c_ii)
    sub = cov_mat[np.ix_(idx, idx)]
    try:
        # D eta and D alpha, with D the inverse of the restricted covariance
        # (not a restriction of the full inverse).
        de_da = np.linalg.solve(sub, np.column_stack((eta, alpha_eff)))
    except np.linalg.LinAlgError:
        return None
    de = de_da[:, 0]
    da = de_da[:, 1]
    c_t = float(eta @ de)
    d_t = float(alpha_eff @ de)
    e_t = float(alpha_eff @ da)
    denom = e_t * c_t - d_t * d_t
    if abs(denom) < 1e-14 * max(1.0, abs(e_t * c_t)):
        return None
    mu = (p_tilde * d_t - e_t) / denom
    mu_tilde = (d_t - p_tilde * c_t) / denom
    w = -mu * de - mu_tilde * da
    risk_sq = float(w @ (sub @ w))
    return w, mu, mu_tilde, math.sqrt(max(risk_sq, 0.0))


def brute_force_min(
    alpha: AlphaSet,
    cov: DenseCovariance,
    p_tilde: float,
    costs: Optional[np.ndarray] = None,
) -> WeightSolution:
    """Global minimum-risk weights at fixed P&L by full pattern enumeration.

    ``costs`` is an optional vector of per-stream linear costs L_i; when
    given, the P&L constraint is sum(alpha_i w_i - L_i |w_i|) = ``p_tilde``.

    Patterns are evaluated in lexicographic order over (-1, 0, +1)
    assignments; risk ties within 1e-12 are broken toward the smaller
    support, then toward the earlier pattern.
    """
    n = alpha.n
    if n > MAX_ORACLE_STREAMS:
        raise DimensionMismatch(
            f"oracle enumeration is capped at N={MAX_ORACLE_STREAMS}, got {n}"
        )
    if cov.n != n:
        raise DimensionMismatch(f"covariance N={cov.n} for {n} streams")
    cov_mat = cov.matrix
    alphas = alpha.alphas
    li = None
    if costs is not None:
        li = np.asarray(costs, dtype=float)
        if li.shape != (n,):
            raise DimensionMismatch(f"{li.size} cost entries for {n} streams")

    best = None  # (risk, |J|, w_full, mu, mu_tilde)
    skipped = 0
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        idx = [i for i, s in enumerate(pattern) if s != 0]
        if not idx:
            continue
        eta = np.array([pattern[i] for i in idx], dtype=float)
        a_eff = alphas[idx] if li is None else alphas[idx] - li[idx] * eta
        sol = _pattern_solution(a_eff, cov_mat, eta, idx, p_tilde)
        if sol is None:
            skipped += 1
            continue
        w, mu, mu_tilde, risk = sol
        if np.any(w * eta <= 0.0):
            continue
        if abs(float(eta @ w) - 1.0) > _CONSTRAINT_TOL:
            continue
        if abs(float(a_eff @ w) - p_tilde) > _CONSTRAINT_TOL * max(1.0, abs(p_tilde)):
            continue
        cand = (risk, len(idx))
        if (
            best is None
            or risk < best[0] - _RISK_TIE_TOL
            or (abs(risk - best[0]) <= _RISK_TIE_TOL and len(idx) < best[1])
        ):
            w_full = np.zeros(n)
            w_full[idx] = w
            best = (*cand, w_full, mu, mu_tilde)
    if skipped:
        logger.debug("oracle skipped %d singular patterns", skipped)
    if best is None:
        raise InfeasibleTarget(
            f"no support/sign pattern admits P&L target {p_tilde:g}"
        )
    risk, _, w_full, mu, mu_tilde = best
    pnl_eff = float(np.dot(alphas, w_full))
    if li is not None:
        pnl_eff -= float(np.dot(li, np.abs(w_full)))
    support = tuple(int(i) for i in np.nonzero(w_full)[0])
    return WeightSolution(
        weights=w_full,
        support=support,
        signs=tuple(int(np.sign(w_full[i])) for i in support),
        mu=float(mu),
        mu_tilde=float(mu_tilde),
        pnl=pnl_eff,
        risk=float(risk),
        sharpe=pnl_eff / risk if risk > 0 else 0.0,
        iterations=0,
        certified_global=bool(
            mu >= (np.max(mu_tilde * li) if li is not None else 0.0) - 1e-12
        ),
    )


def certify(
    sol: WeightSolution,
    alpha: AlphaSet,
    cov: CovarianceModel,
    costs: Optional[np.ndarray] = None,
) -> CertificationReport:
    """Check the first-order and global-minimum conditions for ``sol``.

    Verifies, with the cost-adjusted alphas and thresholds when ``costs`` is
    given: the stationarity residual on the active set (tolerance 1e-8), the
    multiplier bound on every inactive stream (tolerance 1e-10), the identity
    risk^2 = -mu - mu_tilde * pnl (tolerance 1e-9), and the sign condition on
    mu that certifies the global optimum.

    P&L and risk are recomputed from the weights (cost-adjusted), so the
    report does not depend on the solution's own bookkeeping.
    """
    n = alpha.n
    w = sol.weights
    mu = float(sol.mu)
    mu_tilde = float(sol.mu_tilde)
    li = np.zeros(n) if costs is None else np.asarray(costs, dtype=float)
    cw = cov.apply(w)

    stat_res = 0.0
    for i, s in zip(sol.support, sol.signs):
        a_eff = alpha.alphas[i] - li[i] * s
        stat_res = max(stat_res, abs(cw[i] + mu * s + mu_tilde * a_eff))

    inactive_margin = -math.inf
    for j in sol.inactive:
        bound = mu - mu_tilde * li[j]
        inactive_margin = max(
            inactive_margin, abs(mu_tilde * alpha.alphas[j] + cw[j]) - bound
        )
    if inactive_margin == -math.inf:
        inactive_margin = 0.0

    pnl = float(np.dot(alpha.alphas, w) - np.dot(li, np.abs(w)))
    risk_sq = float(np.dot(w, cw))
    identity_gap = abs(risk_sq + mu + mu_tilde * pnl)

    certified = bool(mu >= float(np.max(mu_tilde * li)) - 1e-12)
    return CertificationReport(
        stationarity_residual=float(stat_res),
        stationarity_ok=stat_res <= 1e-8,
        inactive_margin=float(inactive_margin),
        inactive_ok=inactive_margin <= 1e-10,
        identity_gap=float(identity_gap),
        identity_ok=identity_gap <= 1e-9,
        mu=mu,
        certified_global=certified,
    )
