"""Information criteria for choosing the group count and per-group lag order.

Both criteria score a fit through the per-series innovation variances
implied by the group scale matrices, never through the raw series:
penalty + sum_i n_i log sigma2_i. AIC uses penalty 2r, BIC uses
r log(sum_i n_i). The parameter count r defaults to G * (K - 1), one AR
coefficient vector per group; a literal G * K - 1 variant is available for
comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .em import WmmConfig, WmmFit, fit as fit_wmm
from .errors import (
    ConfigError,
    EmptyClusterError,
    NotPositiveDefinite,
    NumericalFailure,
)
from .features import ScatterFeature
from .yule_walker import block_partition


@dataclass
class IcEntry:
    n_groups: int
    aic: float
    bic: float
    n_params: int
    fit: WmmFit


@dataclass
class IcReport:
    """Criterion values per candidate group count.

    `failed` maps group counts whose every restart failed to the error
    message. Selections break ties toward the smaller count.
    """

    entries: list[IcEntry]
    failed: dict[int, str]
    best_aic: int | None
    best_bic: int | None

    def entry(self, n_groups: int) -> IcEntry:
        for e in self.entries:
            if e.n_groups == n_groups:
                return e
        raise KeyError(n_groups)


def _group_schur_ratios(fit) -> np.ndarray:
    """(1 - u' Q^{-1} u / q) per group."""
    out = np.empty(fit.n_groups)
    for g, sig in enumerate(fit.sigma):
        q, u, big_q = block_partition(sig)
        out[g] = (q - float(u @ big_q.solve(u))) / q
    return out


def _innovation_variances(fit, features) -> np.ndarray:
    """Per-series innovation variance at each series' hard group."""
    gamma0 = np.array([float(f.gamma[0]) for f in features])
    ratios = _group_schur_ratios(fit)
    return gamma0 * ratios[fit.labels]


def group_ic(fit, features: list[ScatterFeature], *, literal_r: bool = False):
    """AIC and BIC of a fit; returns (aic, bic, n_params).

    Depends on the fit only through its hard labels and scale matrices
    plus the per-series lag-0 autocovariance and length.
    """
    feats = list(features)
    if [f.id for f in feats] != list(fit.ids):
        raise ConfigError("features do not line up with the fitted panel")
    sigma2 = _innovation_variances(fit, feats)
    n = np.array([f.n for f in feats], dtype=float)
    fit_term = float(n @ np.log(sigma2))
    k = fit.config.window
    g = fit.n_groups
    r = g * k - 1 if literal_r else g * (k - 1)
    aic = 2.0 * r + fit_term
    bic = r * float(np.log(n.sum())) + fit_term
    return aic, bic, r


def select_G(
    features: list[ScatterFeature],
    g_values,
    config: WmmConfig,
    *,
    literal_r: bool = False,
) -> IcReport:
    """Fit every candidate group count and rank by information criteria.

    All candidates reuse the restart seed schedule of `config.seed`, so
    they see identically seeded starts. Candidates whose every restart
    fails are recorded and skipped in the ranking.
    """
    g_values = sorted(set(int(g) for g in g_values))
    if not g_values or g_values[0] < 1:
        raise ConfigError("g_values must contain positive integers")
    entries = []
    failed = {}
    for g in g_values:
        cfg = replace(config, n_groups=g)
        try:
            f = fit_wmm(features, cfg)
        except (EmptyClusterError, NotPositiveDefinite, NumericalFailure) as err:
            failed[g] = str(err)
            continue
        aic, bic, r = group_ic(f, features, literal_r=literal_r)
        entries.append(IcEntry(n_groups=g, aic=aic, bic=bic, n_params=r, fit=f))
    best_aic = None
    best_bic = None
    for e in entries:
        if best_aic is None or e.aic < best_aic[1]:
            best_aic = (e.n_groups, e.aic)
        if best_bic is None or e.bic < best_bic[1]:
            best_bic = (e.n_groups, e.bic)
    return IcReport(
        entries=entries,
        failed=failed,
        best_aic=None if best_aic is None else best_aic[0],
        best_bic=None if best_bic is None else best_bic[0],
    )


def select_lag_per_group(
    fit,
    features: list[ScatterFeature],
    *,
    criterion: str = "aic",
    max_lag: int | None = None,
) -> dict[int, int]:
    """Pick an AR order p in [0, K-1] for every group.

    For each candidate p the Yule-Walker system of the leading
    (p+1) x (p+1) block of the group's scale matrix gives the members'
    innovation variances; the group-local criterion
    penalty(p) + sum_members n_i log sigma2_i(p) is minimized, ties toward
    the smaller order. Needs only cached statistics: scale matrices, hard
    labels, per-series gamma0 and length.
    """
    if criterion not in ("aic", "bic"):
        raise ConfigError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    feats = list(features)
    if [f.id for f in feats] != list(fit.ids):
        raise ConfigError("features do not line up with the fitted panel")
    k = fit.config.window
    p_max = k - 1 if max_lag is None else int(max_lag)
    if not 0 <= p_max <= k - 1:
        raise ConfigError(f"max_lag must lie in [0, {k - 1}]")
    gamma0 = np.array([float(f.gamma[0]) for f in feats])
    n = np.array([f.n for f in feats], dtype=float)
    out = {}
    for g in range(fit.n_groups):
        members = fit.labels == g
        if not members.any():
            out[g] = 0
            continue
        n_g = n[members]
        log_g0 = np.log(gamma0[members])
        total_n = float(n_g.sum())
        m = fit.sigma[g].entries
        best = None
        for p in range(p_max + 1):
            if p == 0:
                ratio = 1.0
            else:
                q, u, big_q = block_partition(m[: p + 1, : p + 1])
                ratio = (q - float(u @ big_q.solve(u))) / q
            fit_term = float(n_g @ (log_g0 + np.log(ratio)))
            penalty = 2.0 * p if criterion == "aic" else p * float(np.log(total_n))
            value = penalty + fit_term
            if best is None or value < best[1]:
                best = (p, value)
        out[g] = best[0]
    return out
