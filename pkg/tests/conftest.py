"""Shared random-instance generators for the test suite."""

import numpy as np

from alphaweights import AlphaSet, DenseCovariance, FactorCovariance


def random_pd_matrix(rng: np.random.Generator, n: int) -> np.ndarray:
    """Well-conditioned random positive-definite matrix."""
    a = rng.standard_normal((n, n))
    m = a @ a.T / n + 0.5 * np.eye(n)
    return 0.5 * (m + m.T)


def random_dense_instance(rng: np.random.Generator, n: int):
    alpha = AlphaSet(
        alphas=rng.uniform(-1.0, 1.0, n),
        vols=np.ones(n),
    )
    cov = DenseCovariance(random_pd_matrix(rng, n))
    return alpha, cov


def random_factor_cov(rng: np.random.Generator, n: int, f: int) -> FactorCovariance:
    return FactorCovariance(
        specific_var=rng.uniform(0.25, 2.25, n),
        loadings=rng.standard_normal((n, f)) * 0.4,
        factor_cov=random_pd_matrix(rng, f),
    )


def random_diag_alpha(rng: np.random.Generator, n: int) -> AlphaSet:
    """Distinct positive alphas and vols, the generic diagonal case."""
    alphas = np.sort(rng.uniform(0.2, 3.0, n))[::-1]
    alphas += np.linspace(0.0, 1e-3, n)  # break accidental ties
    vols = rng.uniform(0.5, 2.0, n)
    return AlphaSet(alphas=alphas, vols=vols)
