"""Diagonalizing a dense covariance into tradable synthetic streams.

Each eigenvector of the covariance, rescaled to unit L1 norm, defines a
portfolio of the original streams; those portfolios are mutually uncorrelated
by construction, so their covariance is diagonal.  This is a diagnostic
transform: allocating through it would require solving for an effective
investment level, which is deliberately not done here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AlphaSet, DenseCovariance
from .errors import DimensionMismatch, IllConditioned

#: Rows whose synthetic alpha is this small (relative to the largest input
#: alpha) are flagged: their sign convention is arbitrary.
_DEGENERATE_ALPHA_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class SyntheticBasis:
    """Eigenportfolios of a dense covariance.

    Row ``a`` of ``portfolio_weights`` holds the L1-normalized weights of the
    a-th synthetic portfolio (descending eigenvalue order).  Signs are flipped
    so every synthetic alpha is non-negative; rows where it vanishes (listed
    in ``degenerate_rows``) instead orient their largest-magnitude weight
    positive.
    """

    portfolio_weights: np.ndarray
    synthetic_alphas: np.ndarray
    synthetic_vars: np.ndarray
    degenerate_rows: tuple


def synthetic_portfolios(alpha: AlphaSet, cov: DenseCovariance) -> SyntheticBasis:
    """Build the synthetic basis from the covariance eigendecomposition.

    Raises :class:`~alphaweights.errors.IllConditioned` when any eigenvalue
    falls below 1e-10 of the largest, since near-null directions make the
    synthetic variances meaningless.
    """
    if cov.n != alpha.n:
        raise DimensionMismatch(f"covariance N={cov.n} for {alpha.n} streams")
    eigvals, eigvecs = np.linalg.eigh(cov.matrix)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    if eigvals[-1] < 1e-10 * eigvals[0]:
        raise IllConditioned(
            f"smallest eigenvalue {eigvals[-1]:g} is below 1e-10 of the "
            f"largest {eigvals[0]:g}"
        )

    n = alpha.n
    weights = np.empty((n, n))
    alphas_syn = np.empty(n)
    variances = np.empty(n)
    degenerate = []
    alpha_scale = max(float(np.max(np.abs(alpha.alphas))), 1.0)
    for a in range(n):
        v = eigvecs[:, a]
        l1 = float(np.sum(np.abs(v)))
        row = v / l1
        a_syn = float(np.dot(v, alpha.alphas)) / l1
        if abs(a_syn) <= _DEGENERATE_ALPHA_TOL * alpha_scale:
            degenerate.append(a)
            a_syn = 0.0
            if row[int(np.argmax(np.abs(row)))] < 0.0:
                row = -row
        elif a_syn < 0.0:
            row = -row
            a_syn = -a_syn
        weights[a] = row
        alphas_syn[a] = a_syn
        variances[a] = eigvals[a] / (l1 * l1)
    return SyntheticBasis(
        portfolio_weights=weights,
        synthetic_alphas=alphas_syn,
        synthetic_vars=variances,
        degenerate_rows=tuple(degenerate),
    )
