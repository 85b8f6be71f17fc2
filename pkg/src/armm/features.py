"""Per-series second-moment features.

Each series of length n is summarized by its first K sample autocovariances
(divisor n), arranged as a K x K Toeplitz scatter matrix scaled by n. These
scatter matrices are the sufficient statistics every later stage works from;
the raw series are not needed again.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import (
    ConfigError,
    DegenerateSeries,
    InsufficientData,
    LagOutOfRange,
    SeriesTooShort,
)


@dataclass(frozen=True)
class TimeSeries:
    """One observed series with its identifier."""

    id: str
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ConfigError(f"series {self.id!r}: values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ConfigError(f"series {self.id!r}: values contain non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ScatterFeature:
    """Toeplitz scatter summary of one series.

    ``gamma[k]`` is the lag-k sample autocovariance (lag-k autocorrelation
    for normalized features), so the scatter matrix is
    ``S[r, c] = n * gamma[|r - c|]``.
    """

    id: str
    gamma: np.ndarray
    n: int

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=float)
        if g.ndim != 1 or g.size < 1:
            raise ConfigError(f"feature {self.id!r}: gamma must be a non-empty vector")
        if not np.all(np.isfinite(g)):
            raise ConfigError(f"feature {self.id!r}: gamma contains non-finite entries")
        if self.n < 1:
            raise ConfigError(f"feature {self.id!r}: n must be positive")
        object.__setattr__(self, "gamma", g)

    @property
    def window(self) -> int:
        return self.gamma.size

    @property
    def scatter(self) -> np.ndarray:
        """The K x K scatter matrix n * toeplitz(gamma)."""
        return self.n * toeplitz(self.gamma)


def center(series: TimeSeries) -> TimeSeries:
    """Subtract the sample mean; requires at least two observations."""
    if series.n < 2:
        raise InsufficientData(f"series {series.id!r}: need at least 2 observations")
    return TimeSeries(series.id, series.values - series.values.mean())


def autocov(series: TimeSeries, lag: int) -> float:
    """Divisor-n sample autocovariance at the given lag.

    The series is used as passed; center it first if it has a nonzero mean.
    """
    n = series.n
    if lag < 0 or lag > n - 1:
        raise LagOutOfRange(f"lag {lag} outside [0, {n - 1}]")
    v = series.values
    return float(np.dot(v[: n - lag], v[lag:]) / n)


def scatter_matrix(series: TimeSeries, window: int) -> ScatterFeature:
    """Build the scatter feature for one series.

    Parameters
    ----------
    series : TimeSeries
        Already centered series of length n > window.
    window : int
        Matrix dimension K, at least 2; uses autocovariances at lags
        0 .. K-1.
    """
    if window < 2:
        raise ConfigError(f"window must be at least 2, got {window}")
    if series.n <= window:
        raise SeriesTooShort(
            f"series {series.id!r}: length {series.n} must exceed window {window}"
        )
    gamma = np.array([autocov(series, k) for k in range(window)])
    if gamma[0] == 0.0:
        raise DegenerateSeries(f"series {series.id!r}: zero variance")
    return ScatterFeature(series.id, gamma, series.n)


def normalized_scatter(series: TimeSeries, window: int) -> ScatterFeature:
    """Scatter feature divided by the lag-0 autocovariance.

    The stored gamma vector then holds autocorrelations and the scatter
    matrix has every diagonal entry equal to n, which removes per-series
    scale before fitting.
    """
    raw = scatter_matrix(series, window)
    return ScatterFeature(raw.id, raw.gamma / raw.gamma[0], raw.n)


def panel_features(
    panel: list[TimeSeries],
    window: int,
    *,
    do_center: bool = True,
    normalized: bool = False,
) -> list[ScatterFeature]:
    """Center (optionally) and summarize every series in a panel."""
    build = normalized_scatter if normalized else scatter_matrix
    out = []
    for series in panel:
        if do_center:
            series = center(series)
        out.append(build(series, window))
    return out
