"""Solvers for the diagonal-covariance case.

With a diagonal covariance all optimal weights are non-negative, so the L1
normalization loses its modulus and everything reduces to closed forms plus
one-dimensional searches.  Four routes are provided:

* :func:`greedy_sort` -- the relaxation ordering that adds one stream at a
  time, each step maximizing P&L at the Sharpe-optimal weights;
* :func:`quasi_optimal` -- near-optimal weights read off that ordering;
* :func:`sphere_optimal` -- the exact maximum-P&L solution at fixed Sharpe,
  found by a root search on the radius coordinate of the constraint sphere;
* :func:`min_vol_fixed_pnl_diag` / :func:`sharpe_target_diag` -- the exact
  minimum-risk solution at fixed P&L, and the bisection over P&L that hits a
  Sharpe target through it.

Internally everything is computed in scaled coordinates (weights multiplied
by vols, alphas divided by vols); results are mapped back before return.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .core import AlphaSet, WeightSolution, ZERO_WEIGHT_TOL
from .errors import (
    DegenerateInput,
    EmptyInput,
    InfeasibleSharpe,
    InfeasibleTarget,
    InvalidTarget,
    BelowSharpeMaxPnl,
    NegativeAlpha,
    NumericalFailure,
)

logger = logging.getLogger(__name__)

_SHARPE_TOL = 1e-9
_ROOT_TOL = 1e-10
_WIDTH_TOL = 1e-14
_MAX_BISECT = 200


@dataclass(frozen=True, eq=False)
class GreedyOrder:
    """Stream ordering with the P&L and Sharpe paths along it.

    ``pnl_path[k]`` and ``sharpe_path[k]`` are the per-unit P&L and Sharpe of
    the Sharpe-optimal portfolio restricted to the first k+1 streams of
    ``permutation``.  The P&L path is strictly decreasing and the Sharpe path
    strictly increasing for generic inputs.
    """

    permutation: np.ndarray
    pnl_path: np.ndarray
    sharpe_path: np.ndarray


def _require_nonnegative(alpha: AlphaSet) -> None:
    if alpha.n == 0:
        raise EmptyInput("need at least one stream")
    if np.any(alpha.alphas < 0.0):
        raise NegativeAlpha(
            "diagonal-case routines require non-negative alphas; flip the "
            "signs of negative streams first"
        )


def _diag_solution(alpha, w_hat, active, mu, mu_tilde, iterations):
    """Build a WeightSolution from scaled weights on an active index list."""
    n = alpha.n
    w = np.zeros(n)
    w[active] = alpha.inv_vols[active] * w_hat
    w[np.abs(w) <= ZERO_WEIGHT_TOL] = 0.0
    w /= np.sum(np.abs(w))
    support = tuple(int(i) for i in np.nonzero(w)[0])
    pnl = float(np.dot(alpha.alphas, w))
    risk = float(np.sqrt(np.sum((alpha.vols * w) ** 2)))
    return WeightSolution(
        weights=w,
        support=support,
        signs=tuple(1 for _ in support),
        mu=None if mu is None else float(mu),
        mu_tilde=None if mu_tilde is None else float(mu_tilde),
        pnl=pnl,
        risk=risk,
        sharpe=pnl / risk,
        iterations=iterations,
        certified_global=(mu is not None and mu >= -1e-12),
    )


def _single_stream_solution(alpha: AlphaSet, index: int) -> WeightSolution:
    """All capital in one stream; the maximum-P&L corner of the frontier."""
    w_hat = np.array([alpha.vols[index]])
    return _diag_solution(alpha, w_hat, [index], None, None, 0)


def greedy_sort(alpha: AlphaSet) -> GreedyOrder:
    """Order streams by repeatedly adding the one that maximizes P&L.

    Starting from the single largest alpha, each step appends the remaining
    stream for which the Sharpe-optimal portfolio over the enlarged set has
    the largest P&L.  Ties pick the lowest original index.
    """
    _require_nonnegative(alpha)
    n = alpha.n
    nu2 = alpha.inv_vols**2
    na = nu2 * alpha.alphas       # nu_i^2 alpha_i
    na2 = na * alpha.alphas       # nu_i^2 alpha_i^2

    remaining = np.ones(n, dtype=bool)
    order = np.empty(n, dtype=int)
    pnl_path = np.empty(n)
    a_sum = 0.0
    b_sum = 0.0
    for k in range(n):
        if k == 0:
            # P(1) = alpha_i, so the first pick is the largest alpha.
            cand = np.where(remaining, alpha.alphas, -np.inf)
        else:
            cand = np.where(remaining, (b_sum + na2) / (a_sum + na), -np.inf)
        pick = int(np.argmax(cand))
        order[k] = pick
        a_sum += na[pick]
        b_sum += na2[pick]
        pnl_path[k] = b_sum / a_sum
        remaining[pick] = False
    sharpe_path = np.sqrt(np.cumsum(alpha.scaled_alphas[order] ** 2))
    return GreedyOrder(
        permutation=order, pnl_path=pnl_path, sharpe_path=sharpe_path
    )


def _eta_root(head_sq: float, tail_sq: float, s_star: float) -> float:
    """Fraction of the marginal stream that lands the Sharpe ratio on target.

    Solves (A + x B)^2 = S^2 (A + x^2 B) for x in (0, 1], where A is the sum
    of squared scaled alphas already included and B the marginal one.
    """
    s2 = s_star * s_star
    a2 = tail_sq * (tail_sq - s2)
    a1 = 2.0 * head_sq * tail_sq
    a0 = head_sq * (head_sq - s2)
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        raise NumericalFailure(
            f"no real root for the marginal fraction (disc={disc:g})"
        )
    sq = math.sqrt(disc)
    if a2 == 0.0:
        roots = [-a0 / a1] if a1 != 0.0 else []
    else:
        # Numerically stable pairing of the two roots.
        q = -0.5 * (a1 + math.copysign(sq, a1))
        roots = [q / a2, a0 / q if q != 0.0 else math.inf]
    admissible = sorted(r for r in roots if 1e-12 < r <= 1.0 + 1e-12)
    if not admissible:
        raise NumericalFailure(
            f"no root in (0, 1] for the marginal fraction (roots={roots})"
        )
    return min(admissible[0], 1.0)


def quasi_optimal(alpha: AlphaSet, s_star: float) -> WeightSolution:
    """Greedy near-optimal weights achieving Sharpe ``s_star``.

    Streams enter in greedy order with weights proportional to their scaled
    alphas; the marginal stream is scaled back so the Sharpe ratio equals the
    target exactly.  When the target is at or below the single-stream Sharpe
    the constraint is slack and all capital goes to the largest alpha.
    """
    _require_nonnegative(alpha)
    if s_star <= 0.0:
        raise InvalidTarget(f"Sharpe target must be positive, got {s_star:g}")
    order = greedy_sort(alpha)
    s_max = float(order.sharpe_path[-1])
    if s_star > s_max * (1.0 + 1e-12):
        raise InfeasibleSharpe(
            f"Sharpe target {s_star:g} exceeds the maximum {s_max:g}"
        )
    s_star = min(s_star, s_max)
    k_star = int(np.searchsorted(order.sharpe_path, s_star))
    if k_star >= alpha.n:
        k_star = alpha.n - 1
    if k_star == 0:
        # Single stream: Sharpe is fixed at its own value, constraint slack.
        return _single_stream_solution(alpha, int(order.permutation[0]))

    ahat = alpha.scaled_alphas[order.permutation]
    head_sq = float(np.sum(ahat[: k_star] ** 2))
    tail_sq = float(ahat[k_star] ** 2)
    if abs(order.sharpe_path[k_star] - s_star) <= 1e-12 * max(1.0, s_star):
        frac = 1.0
    else:
        frac = _eta_root(head_sq, tail_sq, s_star)
    w_hat = ahat[: k_star + 1].copy()
    w_hat[k_star] *= frac
    active = list(order.permutation[: k_star + 1])
    if frac <= ZERO_WEIGHT_TOL:
        w_hat = w_hat[:-1]
        active = active[:-1]
    return _diag_solution(alpha, w_hat, active, None, None, 0)


def min_vol_fixed_pnl_diag(alpha: AlphaSet, p_tilde: float) -> WeightSolution:
    """Minimum-risk weights at fixed per-unit P&L ``p_tilde``.

    Streams are sorted by decreasing alpha; the active count K is the largest
    prefix whose alphas all clear a self-consistent threshold, and the active
    weights are an explicit linear combination of scaled alphas and inverse
    vols.  Valid targets run from the maximum-Sharpe P&L up to (excluding)
    the largest alpha.
    """
    _require_nonnegative(alpha)
    n = alpha.n
    nu = alpha.inv_vols
    ahat = alpha.scaled_alphas
    # Full-set accumulators fix the lower end of the valid target range.
    a_full = float(np.dot(nu, ahat))
    b_full = float(np.dot(ahat, ahat))
    p_smax = b_full / a_full
    alpha_max = float(np.max(alpha.alphas))

    if p_tilde < p_smax * (1.0 - 1e-12):
        raise BelowSharpeMaxPnl(
            f"target {p_tilde:g} is below the maximum-Sharpe P&L {p_smax:g}; "
            "that range is dominated"
        )
    if p_tilde <= p_smax * (1.0 + 1e-12):
        # Maximum-Sharpe configuration: weights proportional to scaled alphas.
        active = [i for i in range(n) if ahat[i] > 0.0]
        w_hat = ahat[active] / a_full
        mu = 0.0
        mu_tilde = -1.0 / a_full
        return _diag_solution(alpha, w_hat, active, mu, mu_tilde, 0)
    if p_tilde >= alpha_max:
        raise InfeasibleTarget(
            f"target {p_tilde:g} is not below the largest alpha {alpha_max:g}"
        )

    order = np.lexsort((np.arange(n), -alpha.alphas))
    a_sorted = alpha.alphas[order]
    cum_a = np.cumsum(nu[order] * ahat[order])
    cum_b = np.cumsum(ahat[order] ** 2)
    cum_n2 = np.cumsum(nu[order] ** 2)

    for k in range(n, 1, -1):
        a_k, b_k, n2_k = cum_a[k - 1], cum_b[k - 1], cum_n2[k - 1]
        denom = n2_k * p_tilde - a_k
        if denom <= 0.0:
            continue
        threshold = (a_k * p_tilde - b_k) / denom
        if a_sorted[k - 1] > threshold:
            gram = n2_k * b_k - a_k * a_k
            if gram <= 1e-14 * n2_k * b_k:
                raise DegenerateInput(
                    "streams are collinear (identical alphas); the fixed-P&L "
                    "closed form is degenerate"
                )
            active = order[:k]
            w_hat = (
                (n2_k * p_tilde - a_k) * ahat[active]
                - (a_k * p_tilde - b_k) * nu[active]
            ) / gram
            mu = (a_k * p_tilde - b_k) / gram
            mu_tilde = -(n2_k * p_tilde - a_k) / gram
            return _diag_solution(alpha, w_hat, list(active), mu, mu_tilde, 0)
    raise NumericalFailure(
        f"no self-consistent active count for target {p_tilde:g}"
    )


def sharpe_target_diag(alpha: AlphaSet, s_star: float) -> WeightSolution:
    """Maximum-P&L weights with Sharpe at least ``s_star``, via fixed-P&L solves.

    Bisects the P&L target between the maximum-Sharpe point and the largest
    alpha until the achieved Sharpe matches the target; when the target is at
    or below the single-stream Sharpe the bound is slack and all capital goes
    to the largest alpha.
    """
    _require_nonnegative(alpha)
    if s_star <= 0.0:
        raise InvalidTarget(f"Sharpe target must be positive, got {s_star:g}")
    nu = alpha.inv_vols
    ahat = alpha.scaled_alphas
    s_max = float(np.sqrt(np.sum(ahat**2)))
    if s_star > s_max * (1.0 + 1e-12):
        raise InfeasibleSharpe(
            f"Sharpe target {s_star:g} exceeds the maximum {s_max:g}"
        )
    top = int(np.argmax(alpha.alphas))
    if alpha.n == 1 or s_star <= ahat[top] * (1.0 + 1e-14):
        return _single_stream_solution(alpha, top)
    if s_star >= s_max * (1.0 - 1e-12):
        return min_vol_fixed_pnl_diag(alpha, float(np.dot(ahat, ahat) / np.dot(nu, ahat)))

    lo = float(np.dot(ahat, ahat) / np.dot(nu, ahat))  # Sharpe = s_max here
    hi = float(np.max(alpha.alphas)) * (1.0 - 1e-12)
    best = None
    for it in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        sol = min_vol_fixed_pnl_diag(alpha, mid)
        best = sol
        if abs(sol.sharpe - s_star) <= _SHARPE_TOL:
            break
        if sol.sharpe > s_star:
            lo = mid  # Sharpe decreases with P&L: move right
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return WeightSolution(
        weights=best.weights,
        support=best.support,
        signs=best.signs,
        mu=best.mu,
        mu_tilde=best.mu_tilde,
        pnl=best.pnl,
        risk=best.risk,
        sharpe=best.sharpe,
        iterations=it + 1,
        certified_global=best.certified_global,
    )


class _SphereGeometry:
    """Scratch state for the fixed-Sharpe maximum-P&L search.

    The Sharpe constraint restricts scaled weights to a sphere in the
    eigenbasis of the rank-one-minus-identity quadratic form; the search
    variable ``b1`` is the coordinate along the one sphere direction that the
    normalization constraint singles out.  Lower ``b1`` means higher P&L, and
    feasibility (non-negative weights) caps how low it can go.
    """

    def __init__(self, alpha: AlphaSet, s_star: float):
        self.nu = alpha.inv_vols
        ahat = alpha.scaled_alphas
        self.norm_alpha = float(np.sqrt(np.sum(ahat**2)))
        self.phi = ahat / self.norm_alpha
        self.phi_tilde = float(np.dot(self.nu, self.phi))
        nu2 = float(np.dot(self.nu, self.nu))
        kappa_sq = nu2 - self.phi_tilde**2
        if kappa_sq <= 1e-14 * nu2:
            raise DegenerateInput(
                "inverse vols and scaled alphas are collinear; the sphere "
                "construction is degenerate"
            )
        self.kappa = math.sqrt(kappa_sq)
        self.radius = math.sqrt(max(self.norm_alpha**2 / s_star**2 - 1.0, 0.0))
        self.b_floor = -self.phi_tilde / self.kappa

    def margins(self, b1: float) -> np.ndarray:
        """Per-stream feasibility margins; negative entries are forced to zero."""
        return b1 * self.nu + (self.kappa - b1 * self.phi_tilde) * self.phi

    def infeasibility(self, b1: float) -> float:
        """Left side of the root equation; crosses 1 at the optimal ``b1``.

        Values <= 1 mean a feasible completion of the weight vector exists at
        this coordinate; > 1 means the non-negativity constraints cannot be
        met.  Returns +inf where the construction itself degenerates.
        """
        b2 = self.radius**2 - b1 * b1
        if b2 <= 0.0:
            return math.inf
        b2 = math.sqrt(b2)
        s = self.margins(b1)
        forced = s < 0.0
        free = ~forced
        if np.count_nonzero(free) < 2:
            return math.inf
        chi_forced = -s[forced] / (self.kappa * b2)
        zeta = float(np.dot(chi_forced, chi_forced))
        chi_t = float(np.dot(self.nu[forced], -chi_forced))
        xi_t = float(np.dot(self.phi[forced], -chi_forced))
        sig = float(np.dot(self.phi[free], self.phi[free]))
        varphi = float(np.dot(self.nu[free], self.phi[free]))
        lam = float(np.dot(self.nu[free], self.nu[free]))
        gram = sig * lam - varphi * varphi
        if gram <= 0.0:
            return math.inf
        quad = sig * chi_t * chi_t + lam * xi_t * xi_t - 2.0 * varphi * chi_t * xi_t
        return zeta + quad / gram

    def weights_at(self, b1: float) -> np.ndarray:
        """Scaled weights at coordinate ``b1``: zero on the forced set, a
        combination of scaled alphas and inverse vols on the rest."""
        denom = self.phi_tilde + b1 * self.kappa
        if denom <= 0.0:
            raise NumericalFailure(
                f"normalization sign flipped at coordinate {b1:g}"
            )
        b2_sq = self.radius**2 - b1 * b1
        s = self.margins(b1)
        forced = s < 0.0
        w_hat = np.zeros_like(s)
        if b2_sq <= 0.0:
            # Polar point: no transverse component.
            w_hat[~forced] = s[~forced] / (self.kappa * denom)
            return w_hat
        b2 = math.sqrt(b2_sq)
        free = ~forced
        chi_forced = -s[forced] / (self.kappa * b2)
        chi_t = float(np.dot(self.nu[forced], -chi_forced))
        xi_t = float(np.dot(self.phi[forced], -chi_forced))
        sig = float(np.dot(self.phi[free], self.phi[free]))
        varphi = float(np.dot(self.nu[free], self.phi[free]))
        lam = float(np.dot(self.nu[free], self.nu[free]))
        gram = sig * lam - varphi * varphi
        if gram <= 0.0:
            raise DegenerateInput(
                "free-set alphas and inverse vols are collinear at the optimum"
            )
        c_m = (lam * xi_t - varphi * chi_t) / gram
        d_m = (sig * chi_t - varphi * xi_t) / gram
        coef_phi = 1.0 - (b1 / self.kappa) * self.phi_tilde + b2 * c_m
        coef_nu = b1 / self.kappa + b2 * d_m
        w_hat[free] = (coef_phi * self.phi[free] + coef_nu * self.nu[free]) / denom
        return w_hat


def _solution_from_hat(alpha, w_hat, s_star, iterations):
    """Clip, renormalize and attach the fixed-P&L multipliers for the support."""
    if float(np.min(w_hat)) < -1e-8:
        raise NumericalFailure(
            f"negative weight {np.min(w_hat):g} in the sphere solution"
        )
    w_hat = np.clip(w_hat, 0.0, None)
    active = [i for i in range(alpha.n) if w_hat[i] > ZERO_WEIGHT_TOL]
    nu = alpha.inv_vols[active]
    ahat = alpha.scaled_alphas[active]
    wa = w_hat[active] / float(np.dot(nu, w_hat[active]))
    p_tilde = float(np.dot(ahat, wa))
    # Multipliers of the equivalent fixed-P&L problem on this support.
    a_k = float(np.dot(nu, ahat))
    b_k = float(np.dot(ahat, ahat))
    n2_k = float(np.dot(nu, nu))
    gram = n2_k * b_k - a_k * a_k
    if gram > 1e-14 * n2_k * b_k:
        mu = (a_k * p_tilde - b_k) / gram
        mu_tilde = -(n2_k * p_tilde - a_k) / gram
    else:
        mu = mu_tilde = None
    sol = _diag_solution(alpha, wa, active, mu, mu_tilde, iterations)
    if abs(sol.sharpe - s_star) > 1e-8 * max(1.0, s_star):
        raise NumericalFailure(
            f"sphere solution Sharpe {sol.sharpe:.12g} missed target "
            f"{s_star:.12g} (support size {len(active)})"
        )
    return sol


def sphere_optimal(alpha: AlphaSet, s_star: float) -> WeightSolution:
    """Maximum-P&L weights at fixed Sharpe ``s_star`` via the sphere search.

    Starts from the quasi-optimal point, brackets the optimal sphere
    coordinate between it and its geometric floor, and bisects until the
    feasibility equation reaches 1 from below (tolerance 1e-10 on the
    equation, 1e-14 on the bracket width, 200 iterations cap).
    """
    _require_nonnegative(alpha)
    if s_star <= 0.0:
        raise InvalidTarget(f"Sharpe target must be positive, got {s_star:g}")
    ahat = alpha.scaled_alphas
    s_max = float(np.sqrt(np.sum(ahat**2)))
    if s_star >= s_max * (1.0 - 1e-12):
        if s_star > s_max * (1.0 + 1e-12):
            raise InfeasibleSharpe(
                f"Sharpe target {s_star:g} exceeds the maximum {s_max:g}"
            )
        # Degenerate sphere: the maximum-Sharpe weights are the only point.
        active = [i for i in range(alpha.n) if ahat[i] > 0.0]
        a_full = float(np.dot(alpha.inv_vols, ahat))
        return _diag_solution(
            alpha, ahat[active] / a_full, active, 0.0, -1.0 / a_full, 0
        )
    top = int(np.argmax(alpha.alphas))
    if alpha.n == 1 or s_star <= ahat[top] * (1.0 + 1e-14):
        # Sharpe bound slack at the single-stream P&L maximum.
        return _single_stream_solution(alpha, top)

    geo = _SphereGeometry(alpha, s_star)

    # South pole first: feasible iff no stream is forced negative there.
    if geo.b_floor <= -geo.radius:
        if geo.b_floor == -geo.radius:
            logger.info(
                "sphere search: feasibility floor coincides with the polar "
                "point; treating as the polar corner"
            )
        w_polar = geo.weights_at(-geo.radius)
        if float(np.min(geo.margins(-geo.radius))) >= -1e-14:
            return _solution_from_hat(alpha, w_polar, s_star, 0)
        if alpha.n == 2:
            # One transverse direction only: the other pole is the answer.
            return _solution_from_hat(
                alpha, geo.weights_at(geo.radius), s_star, 0
            )

    start = quasi_optimal(alpha, s_star)
    z_hat = alpha.vols * start.weights
    proj = float(np.dot(z_hat, geo.phi))
    if proj <= 0.0:
        raise NumericalFailure("quasi-optimal start has no alpha component")
    b_start = (1.0 - geo.phi_tilde * proj) / (geo.kappa * proj)

    lo = max(geo.b_floor, -geo.radius)
    hi = b_start
    if hi <= lo:
        return _solution_from_hat(alpha, geo.weights_at(hi), s_star, 0)
    if geo.infeasibility(lo) <= 1.0:
        # Feasible all the way down to the geometric floor.
        return _solution_from_hat(alpha, geo.weights_at(lo), s_star, 0)

    it = 0
    for it in range(1, _MAX_BISECT + 1):
        mid = 0.5 * (lo + hi)
        lhs = geo.infeasibility(mid)
        if lhs <= 1.0:
            hi = mid
            if 1.0 - lhs <= _ROOT_TOL:
                break
        else:
            lo = mid
        if hi - lo <= _WIDTH_TOL:
            break
    return _solution_from_hat(alpha, geo.weights_at(hi), s_star, it)
