"""Time-series panels, moment estimation and factor-model construction.

Panel CSV format: UTF-8, comma-separated, one header row of stream ids,
body rows of observations ordered most-recent-first, dot decimals, no
thousands separators.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .core import AlphaSet, DenseCovariance, FactorCovariance
from .errors import DegenerateStream, DimensionMismatch, ParseError


@dataclass(frozen=True, eq=False)
class TimeSeriesPanel:
    """M+1 observations of N streams; row 0 is the most recent time."""

    observations: np.ndarray
    stream_ids: tuple

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=float)
        if obs.ndim != 2:
            raise DimensionMismatch("observations must be a 2-d array")
        if obs.shape[0] < 2:
            raise ParseError("need at least two observation rows")
        if obs.shape[1] != len(self.stream_ids):
            raise DimensionMismatch(
                f"{obs.shape[1]} columns for {len(self.stream_ids)} stream ids"
            )
        if not np.all(np.isfinite(obs)):
            raise ParseError("observations contain non-finite values")
        obs = obs.copy()
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "stream_ids", tuple(str(s) for s in self.stream_ids))

    @property
    def n(self) -> int:
        return self.observations.shape[1]

    @property
    def m(self) -> int:
        """Number of observations minus one."""
        return self.observations.shape[0] - 1


def load_panel(path) -> TimeSeriesPanel:
    """Read a panel CSV; raises ParseError with row/column locations."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        ids = [h.strip() for h in header]
        if not ids or any(not h for h in ids):
            raise ParseError(f"{path}: header row must name every stream")
        rows = []
        for r, row in enumerate(reader, start=2):
            if len(row) != len(ids):
                raise ParseError(
                    f"{path}: row {r} has {len(row)} fields, expected {len(ids)}"
                )
            parsed = []
            for c, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {r} column {c}: not a number: {cell!r}"
                    ) from None
            rows.append(parsed)
    if len(rows) < 2:
        raise ParseError(f"{path}: need at least two observation rows, got {len(rows)}")
    return TimeSeriesPanel(observations=np.array(rows), stream_ids=tuple(ids))


def save_panel(panel: TimeSeriesPanel, path) -> None:
    """Write a panel CSV that loads back bit-identically."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(panel.stream_ids)
        for row in panel.observations:
            writer.writerow([repr(float(x)) for x in row])


def estimate_moments(panel: TimeSeriesPanel):
    """Sample means, unbiased covariance and correlation of the panel.

    Returns ``(alpha_set, dense_covariance, correlation)``.  Warns when the
    panel is too short for full rank (fewer than N increments); the dense
    covariance constructor then rejects the rank-deficient estimate.
    """
    obs = panel.observations
    n = panel.n
    if panel.m < n:
        warnings.warn(
            f"only {panel.m} increments for {n} streams: the sample "
            f"covariance has rank at most {panel.m}",
            stacklevel=2,
        )
    alphas = obs.mean(axis=0)
    cov = np.atleast_2d(np.cov(obs, rowvar=False, ddof=1))
    var = np.diag(cov)
    dead = np.nonzero(var <= 0.0)[0]
    if dead.size:
        names = ", ".join(panel.stream_ids[i] for i in dead)
        raise DegenerateStream(f"zero-variance stream(s): {names}")
    sd = np.sqrt(var)
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    alpha_set = AlphaSet(alphas=alphas, vols=sd)
    return alpha_set, DenseCovariance(cov), corr


def build_factor_model(cov: DenseCovariance, f: int) -> FactorCovariance:
    """Approximate a dense covariance by its top-``f`` principal components.

    Loadings are the leading eigenvectors scaled by the square roots of
    their eigenvalues (factor covariance = identity); specific variances
    absorb the diagonal residual, floored at 1e-8 of each total variance.
    Warns when the floor fires on more than 10% of streams.
    """
    n = cov.n
    if not 1 <= f < n:
        raise DimensionMismatch(f"factor count must satisfy 1 <= F < N={n}")
    eigvals, eigvecs = np.linalg.eigh(cov.matrix)
    order = np.argsort(eigvals)[::-1][:f]
    lam = eigvals[order]
    vec = eigvecs[:, order]
    # Deterministic sign convention: largest-magnitude entry positive.
    for a in range(f):
        j = int(np.argmax(np.abs(vec[:, a])))
        if vec[j, a] < 0.0:
            vec[:, a] = -vec[:, a]
    loadings = vec * np.sqrt(lam)
    total = np.diag(cov.matrix)
    resid = total - np.sum(loadings**2, axis=1)
    floor = 1e-8 * total
    floored = resid < floor
    if np.count_nonzero(floored) > 0.1 * n:
        warnings.warn(
            f"specific-variance floor hit on {int(np.count_nonzero(floored))} "
            f"of {n} streams; the factor model is ill-conditioned",
            stacklevel=2,
        )
    specific = np.where(floored, floor, resid)
    return FactorCovariance(
        specific_var=specific, loadings=loadings, factor_cov=np.eye(f)
    )
