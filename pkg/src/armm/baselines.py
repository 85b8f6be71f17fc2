"""Distance and model-based baselines for panel clustering.

Every method works from the same per-series summaries as the mixture:
autocorrelations, partial autocorrelations or per-series AR coefficients,
paired with complete-linkage agglomeration or a Gaussian mixture on the
coefficient vectors. Accuracy against known groups is the best match
fraction over relabelings.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular, toeplitz
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import (
    ConfigError,
    EmptyClusterError,
    NotPositiveDefinite,
    NumericalFailure,
)
from .features import ScatterFeature, TimeSeries, center, scatter_matrix
from .wishart import SpdMatrix

_BRUTE_FORCE_LIMIT = 8


# ---- per-series summaries -------------------------------------------------


def acf_vector(series: TimeSeries, window: int) -> np.ndarray:
    """Sample autocorrelations at lags 1 .. window-1, computed about the mean."""
    feat = scatter_matrix(center(series), window)
    return feat.gamma[1:] / feat.gamma[0]


def _pacf_from_rho(rho: np.ndarray) -> np.ndarray:
    """Partial autocorrelations from autocorrelations, Durbin-Levinson."""
    p = rho.size
    out = np.empty(p)
    phi = np.empty(0)
    for m in range(1, p + 1):
        if m == 1:
            a = rho[0]
        else:
            num = rho[m - 1] - float(phi @ rho[m - 2 :: -1])
            den = 1.0 - float(phi @ rho[: m - 1])
            if den <= 0.0:
                warnings.warn(
                    "partial autocorrelation recursion broke down; clipping",
                    RuntimeWarning,
                    stacklevel=3,
                )
                a = np.sign(num) if num != 0.0 else 0.0
            else:
                a = num / den
        if abs(a) > 1.0:
            warnings.warn(
                "partial autocorrelation outside [-1, 1]; clipping",
                RuntimeWarning,
                stacklevel=3,
            )
            a = float(np.clip(a, -1.0, 1.0))
        out[m - 1] = a
        phi = np.concatenate([phi - a * phi[::-1], [a]])
    return out


def pacf(series: TimeSeries, window: int) -> np.ndarray:
    """Partial autocorrelations at lags 1 .. window-1, clipped to [-1, 1]."""
    return _pacf_from_rho(acf_vector(series, window))


def ar_coefficients(series: TimeSeries, window: int, estimator: str = "yw") -> np.ndarray:
    """Per-series AR(window-1) coefficients.

    'yw' solves the series' own Yule-Walker system; 'cls' runs conditional
    least squares of each value on its window-1 predecessors.
    """
    if estimator == "yw":
        feat = scatter_matrix(center(series), window)
        return _ar_from_gamma(feat.gamma)
    if estimator == "cls":
        p = window - 1
        v = center(series).values
        if series.n <= window:
            raise ConfigError(
                f"series {series.id!r}: length {series.n} must exceed window {window}"
            )
        design = np.column_stack([v[p - j - 1 : series.n - j - 1] for j in range(p)])
        target = v[p:]
        coef, *_ = np.linalg.lstsq(design, target, rcond=None)
        return coef
    raise ConfigError(f"estimator must be 'yw' or 'cls', got {estimator!r}")


def _ar_from_gamma(gamma: np.ndarray) -> np.ndarray:
    big_q = SpdMatrix(toeplitz(gamma[:-1]))
    return big_q.solve(gamma[1:])


# ---- pairwise distances ---------------------------------------------------


def d_acf(x: TimeSeries, y: TimeSeries, window: int) -> float:
    """Euclidean distance between autocorrelation vectors."""
    return float(np.linalg.norm(acf_vector(x, window) - acf_vector(y, window)))


def d_pacf(x: TimeSeries, y: TimeSeries, window: int) -> float:
    """Euclidean distance between partial autocorrelation vectors."""
    return float(np.linalg.norm(pacf(x, window) - pacf(y, window)))


def d_pic(x: TimeSeries, y: TimeSeries, window: int, estimator: str = "yw") -> float:
    """Euclidean distance between per-series AR coefficient vectors."""
    return float(
        np.linalg.norm(
            ar_coefficients(x, window, estimator) - ar_coefficients(y, window, estimator)
        )
    )


@dataclass
class DistanceMatrix:
    """Symmetric pairwise distances with the series ids they index."""

    ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = len(self.ids)
        if v.shape != (n, n):
            raise ConfigError(f"distance matrix shape {v.shape} does not match {n} ids")
        if not np.all(np.isfinite(v)):
            raise ConfigError("distance matrix contains non-finite entries")
        if np.abs(v - v.T).max() > 1e-12 * max(1.0, np.abs(v).max()):
            raise ConfigError("distance matrix is not symmetric")
        self.values = 0.5 * (v + v.T)


def feature_vectors(
    features: list[ScatterFeature], kind: str, estimator: str = "yw"
) -> np.ndarray:
    """Stack per-series summary vectors straight from cached features."""
    gammas = np.stack([f.gamma for f in features])
    rho = gammas[:, 1:] / gammas[:, :1]
    if kind == "acf":
        return rho
    if kind == "pacf":
        return np.stack([_pacf_from_rho(r) for r in rho])
    if kind == "pic":
        if estimator != "yw":
            raise ConfigError("feature_vectors supports only the 'yw' estimator")
        return np.stack([_ar_from_gamma(g) for g in gammas])
    raise ConfigError(f"kind must be 'acf', 'pacf' or 'pic', got {kind!r}")


def distance_matrix(features: list[ScatterFeature], kind: str) -> DistanceMatrix:
    """Pairwise Euclidean distances on the chosen summary vectors."""
    vecs = feature_vectors(features, kind)
    return DistanceMatrix([f.id for f in features], cdist(vecs, vecs))


# ---- clustering -----------------------------------------------------------


def hierarchical_cluster(dist, n_clusters: int, linkage: str = "complete") -> np.ndarray:
    """Agglomerative clustering cut at the requested number of clusters.

    Merges the closest active pair each step; exact ties go to the
    lexicographically smallest index pair, so the result is deterministic.
    Returned labels are 0-based, numbered by each cluster's smallest member.
    """
    if linkage not in ("complete", "average"):
        raise ConfigError(f"linkage must be 'complete' or 'average', got {linkage!r}")
    values = dist.values if isinstance(dist, DistanceMatrix) else np.asarray(dist, float)
    n = values.shape[0]
    if values.shape != (n, n):
        raise ConfigError("distance matrix must be square")
    if not 1 <= n_clusters <= n:
        raise ConfigError(f"n_clusters must lie in [1, {n}]")
    work = values.astype(float, copy=True)
    np.fill_diagonal(work, np.inf)
    sizes = np.ones(n)
    assign = np.arange(n)
    for _ in range(n - n_clusters):
        flat = int(np.argmin(work))
        a, b = divmod(flat, n)
        if a > b:  # argmin lands on the upper triangle first; keep a < b
            a, b = b, a
        if linkage == "complete":
            merged = np.maximum(work[a], work[b])
        else:
            merged = (sizes[a] * work[a] + sizes[b] * work[b]) / (sizes[a] + sizes[b])
        work[a] = merged
        work[:, a] = merged
        work[a, a] = np.inf
        work[b] = np.inf
        work[:, b] = np.inf
        sizes[a] += sizes[b]
        assign[assign == b] = a
    return np.unique(assign, return_inverse=True)[1]


# ---- Gaussian mixture on coefficient vectors ------------------------------


@dataclass
class GmmFit:
    """Full-covariance Gaussian mixture fit."""

    pi: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    resp: np.ndarray
    labels: np.ndarray
    loglik_trace: np.ndarray
    converged: bool
    n_failed_restarts: int

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])


def _gauss_log_weights(x, pi, mean, cov):
    n, d = x.shape
    lw = np.empty((n, pi.size))
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
    for g in range(pi.size):
        try:
            low = np.linalg.cholesky(cov[g])
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite(f"component {g} covariance collapsed") from None
        sol = solve_triangular(low, (x - mean[g]).T, lower=True)
        maha = np.sum(sol * sol, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(low)))
        lw[:, g] = logpi[g] - 0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)
    return lw


def _gmm_mstep(x, resp, ridge, tied):
    n, d = x.shape
    nk = resp.sum(axis=0)
    if nk.min() < 1e-10 * n:
        raise EmptyClusterError("component lost all responsibility mass")
    pi = nk / n
    mean = (resp.T @ x) / nk[:, None]
    cov = np.empty((pi.size, d, d))
    for g in range(pi.size):
        diff = x - mean[g]
        cov[g] = (diff * resp[:, g][:, None]).T @ diff
    if tied:
        cov[:] = cov.sum(axis=0) / n
    else:
        cov /= nk[:, None, None]
    for g in range(pi.size):
        cov[g] += (ridge * np.trace(cov[g]) / d) * np.eye(d)
    return pi, mean, cov


def _gmm_single(x, resp0, max_iter, tol, ridge, tied):
    pi, mean, cov = _gmm_mstep(x, resp0, ridge, tied)
    resp_prev = resp0
    trace = []
    prev_ll = None
    converged = False
    for _ in range(max_iter):
        lw = _gauss_log_weights(x, pi, mean, cov)
        m = lw.max(axis=1)
        if not np.all(np.isfinite(m)):
            raise NumericalFailure("all component densities underflowed")
        shifted = np.exp(lw - m[:, None])
        total = shifted.sum(axis=1)
        resp = shifted / total[:, None]
        ll = float((m + np.log(total)).sum())
        trace.append(ll)
        if prev_ll is not None and (
            abs(ll - prev_ll) <= tol * (1.0 + abs(prev_ll))
            or np.abs(resp - resp_prev).max() < tol
        ):
            converged = True
            break
        pi, mean, cov = _gmm_mstep(x, resp, ridge, tied)
        prev_ll = ll
        resp_prev = resp
    return pi, mean, cov, resp, np.array(trace), converged


def gmm_fit(
    x,
    n_groups: int,
    *,
    max_iter: int = 500,
    tol: float = 1e-8,
    n_restarts: int = 10,
    seed: int = 0,
    ridge: float = 1e-8,
    covariance: str = "full",
) -> GmmFit:
    """EM for a Gaussian mixture with random restarts.

    'full' covariance estimates one matrix per component; 'tied' pools a
    single matrix across components, which keeps a noisy component from
    shrink-wrapping a tight subset of points. Covariances get a diagonal
    ridge of `ridge` * trace/dim after every update. A restart whose
    component collapses anyway is discarded; the fit fails only if every
    restart does.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] < n_groups:
        raise ConfigError(f"x must be (n, d) with n >= {n_groups}")
    if covariance not in ("full", "tied"):
        raise ConfigError(f"covariance must be 'full' or 'tied', got {covariance!r}")
    tied = covariance == "tied"
    best = None
    failures = 0
    last_err = None
    for r in range(n_restarts):
        rng = np.random.default_rng([seed, r])
        resp0 = rng.dirichlet(np.ones(n_groups), size=x.shape[0])
        try:
            result = _gmm_single(x, resp0, max_iter, tol, ridge, tied)
        except (EmptyClusterError, NotPositiveDefinite, NumericalFailure) as err:
            failures += 1
            last_err = err
            continue
        if best is None or result[4][-1] > best[4][-1]:
            best = result
    if best is None:
        raise type(last_err)(f"all {n_restarts} restarts failed; last error: {last_err}")
    pi, mean, cov, resp, trace, converged = best
    return GmmFit(
        pi=pi,
        mean=mean,
        cov=cov,
        resp=resp,
        labels=np.argmax(resp, axis=1),
        loglik_trace=trace,
        converged=converged,
        n_failed_restarts=failures,
    )


# ---- evaluation -----------------------------------------------------------


def clustering_accuracy(true_labels, est_labels) -> float:
    """Best match fraction over relabelings of the estimated clusters.

    Exhaustive over permutations up to 8 distinct labels, optimal
    assignment beyond that.
    """
    t = np.asarray(true_labels)
    e = np.asarray(est_labels)
    if t.shape != e.shape or t.ndim != 1 or t.size == 0:
        raise ConfigError("label vectors must be equal-length and non-empty")
    _, t_idx = np.unique(t, return_inverse=True)
    _, e_idx = np.unique(e, return_inverse=True)
    m = int(max(t_idx.max(), e_idx.max())) + 1
    conf = np.zeros((m, m))
    np.add.at(conf, (t_idx, e_idx), 1.0)
    if m <= _BRUTE_FORCE_LIMIT:
        cols = np.arange(m)
        best = max(
            float(conf[np.array(perm), cols].sum())
            for perm in itertools.permutations(range(m))
        )
    else:
        rows, cols = linear_sum_assignment(-conf)
        best = float(conf[rows, cols].sum())
    return best / t.size
