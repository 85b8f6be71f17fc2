"""EM fitting of Wishart mixtures over per-series scatter matrices.

Two variants share one update loop. The base variant uses each series'
length as its Wishart degrees of freedom. The adjusted variant multiplies
those lengths by a per-group factor, re-estimated every cycle from the root
of the score of the expected complete-data log-likelihood, which compensates
for the dependence within each series.

All density arithmetic happens in log space; responsibilities are formed
with a row-wise log-sum-exp. Per-panel quantities that do not change across
iterations (scatter stacks, log determinants, gamma-function sums) are
computed once and reused.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.vq import kmeans2, ClusterError
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import (
    ConfigError,
    DomainError,
    EmptyClusterError,
    NotPositiveDefinite,
    NumericalFailure,
)
from .features import ScatterFeature
from .wishart import LOG2, LOGPI, SpdMatrix, as_spd, digamma, _digamma_scalar

EPS_EMPTY = 1e-10
LAMBDA_MARGIN = 1e-6

_INITS = ("random", "kmeans", "labels")
_VARIANTS = ("em1", "em2")


@dataclass
class WmmConfig:
    """Settings for a mixture fit.

    `window` is the scatter dimension K and must match the features passed
    to `fit`. `lambda_upper` caps the degrees-of-freedom factor of the
    adjusted variant; the admissible interval is
    ((K-1)/min(n_i) + 1e-6, lambda_upper].
    """

    n_groups: int
    window: int
    variant: str = "em1"
    max_iter: int = 500
    tol: float = 1e-8
    lambda_upper: float = 1.0
    n_restarts: int = 10
    seed: int = 0
    init: str = "random"
    init_labels: np.ndarray | None = None

    def __post_init__(self):
        if self.n_groups < 1:
            raise ConfigError(f"n_groups must be at least 1, got {self.n_groups}")
        if self.window < 2:
            raise ConfigError(f"window must be at least 2, got {self.window}")
        if self.variant not in _VARIANTS:
            raise ConfigError(f"variant must be one of {_VARIANTS}, got {self.variant!r}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not np.isfinite(self.lambda_upper) or self.lambda_upper <= 0:
            raise ConfigError("lambda_upper must be positive and finite")
        if self.n_restarts < 1:
            raise ConfigError("n_restarts must be positive")
        if self.init not in _INITS:
            raise ConfigError(f"init must be one of {_INITS}, got {self.init!r}")
        if (self.init == "labels") != (self.init_labels is not None):
            raise ConfigError("init_labels must be given exactly when init='labels'")


@dataclass
class WmmFit:
    """Result of a mixture fit.

    `resp[i, g]` is the posterior weight of group g for series i; `labels`
    holds the row-wise argmax (lowest index on ties). `loglik_trace` has one
    entry per likelihood evaluation of the kept restart and `n_iter` counts
    them.
    """

    ids: list[str]
    pi: np.ndarray
    sigma: list[SpdMatrix]
    lam: np.ndarray
    resp: np.ndarray
    labels: np.ndarray
    loglik_trace: np.ndarray
    converged: bool
    n_iter: int
    n_failed_restarts: int
    config: WmmConfig

    @property
    def loglik(self) -> float:
        return float(self.loglik_trace[-1])

    @property
    def n_groups(self) -> int:
        return self.pi.size


class _Panel:
    """Stacked per-series arrays shared across EM iterations."""

    def __init__(self, features: list[ScatterFeature]):
        if len(features) == 0:
            raise ConfigError("need at least one feature")
        ids = [f.id for f in features]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate series ids in panel")
        window = features[0].window
        for f in features:
            if f.window != window:
                raise ConfigError(
                    f"feature {f.id!r} has window {f.window}, expected {window}"
                )
            if f.n <= window:
                raise ConfigError(
                    f"feature {f.id!r}: n={f.n} must exceed window {window}"
                )
        self.ids = ids
        self.window = window
        self.n = np.array([f.n for f in features], dtype=float)
        self.gamma0 = np.array([float(f.gamma[0]) for f in features])
        self.scatter = np.stack([f.scatter for f in features])
        try:
            chols = np.linalg.cholesky(self.scatter)
        except np.linalg.LinAlgError:
            bad = self._first_non_pd(features)
            raise NotPositiveDefinite(f"scatter matrix of series {bad!r} is not PD") from None
        diags = np.diagonal(chols, axis1=1, axis2=2)
        self.logdet_scatter = 2.0 * np.log(diags).sum(axis=1)
        # series-only density constants: |S|^{-(K+1)/2} and the pi power of
        # the multivariate gamma normalizer
        self.base_const = (
            -0.5 * (window + 1) * self.logdet_scatter - 0.25 * window * (window - 1) * LOGPI
        )
        self.uniq_n, self.uniq_inv = np.unique(self.n, return_inverse=True)
        self._js = np.arange(window, dtype=float)
        self.lgam_unit = self._sum_lgamma(1.0)

    @staticmethod
    def _first_non_pd(features) -> str:
        for f in features:
            try:
                np.linalg.cholesky(f.scatter)
            except np.linalg.LinAlgError:
                return f.id
        return features[0].id

    @property
    def size(self) -> int:
        return len(self.ids)

    def _sum_lgamma(self, lam: float) -> np.ndarray:
        """sum_k log Gamma((lam * n_i - k + 1) / 2) for every series."""
        args = 0.5 * (lam * self.uniq_n[:, None] - self._js)
        if args.min() <= 0.0:
            raise DomainError(
                f"degrees of freedom {lam} * n fall at or below window - 1"
            )
        return gammaln(args).sum(axis=1)[self.uniq_inv]

    def sum_lgamma(self, lam: float) -> np.ndarray:
        if lam == 1.0:
            return self.lgam_unit
        return self._sum_lgamma(lam)

    def _psi_uniq(self, lam: float) -> np.ndarray:
        """sum_k psi((lam * n - k + 1) / 2) per unique series length."""
        args = 0.5 * (lam * self.uniq_n[:, None] - self._js)
        if args.min() <= 0.0:
            raise DomainError(
                f"degrees of freedom {lam} * n fall at or below window - 1"
            )
        return digamma(args).sum(axis=1)

    def psi_sum(self, lam: float) -> np.ndarray:
        """sum_k psi((lam * n_i - k + 1) / 2) for every series."""
        return self._psi_uniq(lam)[self.uniq_inv]


def _as_panel(features) -> _Panel:
    return features if isinstance(features, _Panel) else _Panel(features)


def _check_mixture_args(panel, pi, sigma, lam):
    pi = np.asarray(pi, dtype=float)
    g = pi.size
    if g < 1 or len(sigma) != g:
        raise ConfigError(f"pi has {g} entries but {len(sigma)} scale matrices given")
    if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-8:
        raise ConfigError("pi must be a probability vector")
    sigma = [as_spd(s) for s in sigma]
    for s in sigma:
        if s.dim != panel.window:
            raise ConfigError(
                f"scale matrix is {s.dim}x{s.dim}, features have window {panel.window}"
            )
    if lam is None:
        lam = np.ones(g)
    else:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (g,):
            raise ConfigError(f"lam must have shape ({g},)")
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            raise ConfigError("lam entries must be positive and finite")
    return pi, sigma, lam


def _log_weight_matrix(panel, pi, sigma, lam) -> np.ndarray:
    """Full log(pi_g) + log-density matrix, one row per series."""
    lw = np.empty((panel.size, pi.size))
    half_nu_base = panel.logdet_scatter - panel.window * LOG2
    with np.errstate(divide="ignore"):
        logpi = np.log(pi)
    for g, sig in enumerate(sigma):
        nu = lam[g] * panel.n
        tr = np.einsum("rc,irc->i", sig.inv, panel.scatter)
        logh = 0.5 * nu * (half_nu_base - sig.logdet) - 0.5 * tr
        lw[:, g] = logpi[g] + panel.base_const + logh - panel.sum_lgamma(lam[g])
    return lw


def _softmax_rows(lw):
    m = lw.max(axis=1)
    if not np.all(np.isfinite(m)):
        raise NumericalFailure("all group densities underflowed for some series")
    shifted = np.exp(lw - m[:, None])
    total = shifted.sum(axis=1)
    return shifted / total[:, None], m + np.log(total)


def responsibilities(features, pi, sigma, lam=None) -> np.ndarray:
    """Posterior group weights for every series.

    Rows are normalized with log-sum-exp, so only density ratios matter.
    `lam` scales each group's degrees of freedom; omitted means all ones.
    """
    panel = _as_panel(features)
    pi, sigma, lam = _check_mixture_args(panel, pi, sigma, lam)
    resp, _ = _softmax_rows(_log_weight_matrix(panel, pi, sigma, lam))
    return resp


def observed_loglik(features, pi, sigma, lam=None) -> float:
    """Marginal log-likelihood of the panel under the mixture.

    Includes the full density normalizers, so values are comparable across
    iterations of one fit but not across different `lam`.
    """
    panel = _as_panel(features)
    pi, sigma, lam = _check_mixture_args(panel, pi, sigma, lam)
    _, lse = _softmax_rows(_log_weight_matrix(panel, pi, sigma, lam))
    return float(lse.sum())


def update_pi(resp) -> np.ndarray:
    """Mixing proportions: column means of the responsibility matrix."""
    resp = np.asarray(resp, dtype=float)
    if resp.ndim != 2:
        raise ConfigError("resp must be a matrix")
    return resp.mean(axis=0)


def update_sigma(features, resp, lam=None) -> list[SpdMatrix]:
    """Group scale matrices from responsibility-weighted scatter sums.

    Sigma_g = sum_i resp[i, g] S_i / (lam_g * sum_i resp[i, g] n_i). A group
    whose responsibility mass falls below 1e-10 per series is treated as
    collapsed.
    """
    panel = _as_panel(features)
    resp = np.asarray(resp, dtype=float)
    if resp.shape[0] != panel.size:
        raise ConfigError(f"resp has {resp.shape[0]} rows, panel has {panel.size}")
    g_count = resp.shape[1]
    lam = np.ones(g_count) if lam is None else np.asarray(lam, dtype=float)
    out = []
    for g in range(g_count):
        w = resp[:, g]
        if w.sum() < EPS_EMPTY * panel.size:
            raise EmptyClusterError(f"group {g} lost all responsibility mass")
        num = np.einsum("i,irc->rc", w, panel.scatter)
        out.append(SpdMatrix(num / (lam[g] * float(w @ panel.n))))
    return out


def lambda_score(features, resp_g, sigma_g, lam: float) -> float:
    """Score of the expected complete-data log-likelihood in the
    degrees-of-freedom factor of one group.

    sum_i z_i n_i logdet(S_i Sigma_g^{-1} / 2)
      - sum_i z_i n_i sum_k psi((lam n_i - k + 1) / 2).

    Strictly decreasing in lam because psi is increasing.
    """
    panel = _as_panel(features)
    z = np.asarray(resp_g, dtype=float)
    if z.shape != (panel.size,):
        raise ConfigError(f"resp_g must have shape ({panel.size},)")
    sig = as_spd(sigma_g)
    zn = z * panel.n
    t1 = float(zn @ (panel.logdet_scatter - sig.logdet - panel.window * LOG2))
    return t1 - float(zn @ panel.psi_sum(float(lam)))


def update_lambda(
    features,
    resp_g,
    sigma_g,
    upper: float,
    *,
    lower: float | None = None,
    xtol: float = 1e-12,
) -> float:
    """Root of the degrees-of-freedom score over (lower, upper].

    The default lower end is (K-1)/min(n_i) + 1e-6, just inside the region
    where every scaled degree of freedom stays admissible. The score is
    strictly decreasing, so a positive value at `upper` clamps to `upper`
    and a negative value at `lower` clamps to `lower`; otherwise the
    bracketed root is found to `xtol`.
    """
    panel = _as_panel(features)
    z = np.asarray(resp_g, dtype=float)
    if z.shape != (panel.size,):
        raise ConfigError(f"resp_g must have shape ({panel.size},)")
    sig = as_spd(sigma_g)
    if lower is None:
        lower = (panel.window - 1) / float(panel.n.min()) + LAMBDA_MARGIN
    if not lower < upper:
        raise ConfigError(
            f"empty admissible interval: lower {lower} must be below upper {upper}"
        )
    zn = z * panel.n
    t1 = float(zn @ (panel.logdet_scatter - sig.logdet - panel.window * LOG2))
    zn_uniq = np.bincount(panel.uniq_inv, weights=zn, minlength=panel.uniq_n.size)
    return _solve_lambda(panel, zn_uniq, t1, lower, upper, xtol)


def _solve_lambda(panel, zn_uniq, t1, lower, upper, xtol, guess=None, width=None):
    """Shared root-finder behind the degrees-of-freedom update.

    A guess strictly inside the interval (the previous iterate, in the main
    loop) buys a narrow starting bracket of half-width `width`; two probe
    evaluations either confirm it or shrink the full interval on the correct
    side. The score runs through the scalar digamma twin because the
    root-finder evaluates it one point at a time.
    """
    weights = zn_uniq.tolist()
    lengths = panel.uniq_n.tolist()
    window = panel.window

    def score(lam):
        if lam * lengths[0] - (window - 1) <= 0.0:
            raise DomainError(
                f"degrees of freedom {lam} * n fall at or below window - 1"
            )
        tot = t1
        for w, n in zip(weights, lengths):
            base = lam * n
            acc = 0.0
            for j in range(window):
                acc += _digamma_scalar(0.5 * (base - j))
            tot -= w * acc
        return tot

    if score(upper) >= 0.0:
        return float(upper)
    if guess is not None and lower < guess < upper:
        delta = max(width if width is not None else 1e-3 * (upper - lower),
                    64.0 * xtol)
        a = max(lower, guess - delta)
        b = min(upper, guess + delta)
        sa = score(a)
        if sa == 0.0:
            return float(a)
        if sa > 0.0:
            if score(b) < 0.0:
                return float(brentq(score, a, b, xtol=xtol))
            return float(brentq(score, b, upper, xtol=xtol))
        if a == lower or score(lower) <= 0.0:
            return float(lower)
        return float(brentq(score, lower, a, xtol=xtol))
    if score(lower) <= 0.0:
        return float(lower)
    return float(brentq(score, lower, upper, xtol=xtol))


# ---- initialization -------------------------------------------------------


def _init_resp(panel, config, rng) -> np.ndarray:
    g = config.n_groups
    if config.init == "labels":
        labels = np.asarray(config.init_labels)
        if labels.shape != (panel.size,):
            raise ConfigError(f"init_labels must have shape ({panel.size},)")
        if labels.min() < 0 or labels.max() >= g:
            raise ConfigError(f"init_labels must lie in [0, {g - 1}]")
        return np.eye(g)[labels.astype(int)]
    if config.init == "kmeans":
        rho = panel.scatter[:, 0, 1:] / panel.scatter[:, 0, 0][:, None]
        try:
            _, labels = kmeans2(rho, g, minit="++", seed=rng, missing="raise")
            if np.unique(labels).size == g:
                return np.eye(g)[labels]
        except ClusterError:
            pass
        # degenerate k-means split, fall through to a random start
    return rng.dirichlet(np.ones(g), size=panel.size)


# ---- main loop ------------------------------------------------------------


def _run_em(panel, resp0, config):
    em2 = config.variant == "em2"
    lam = np.full(config.n_groups, min(1.0, config.lambda_upper))
    if em2:
        lam_lower = (panel.window - 1) / float(panel.n.min()) + LAMBDA_MARGIN
        if not lam_lower < config.lambda_upper:
            raise ConfigError(
                f"lambda_upper {config.lambda_upper} not above the admissible "
                f"lower end {lam_lower}"
            )
        lam_width = [None] * config.n_groups
    resp_prev = resp0
    pi = update_pi(resp0)
    sigma = update_sigma(panel, resp0, lam)
    trace = []
    prev_ll = None
    converged = False
    for _ in range(config.max_iter):
        resp, lse = _softmax_rows(_log_weight_matrix(panel, pi, sigma, lam))
        ll = float(lse.sum())
        trace.append(ll)
        if prev_ll is not None and (
            abs(ll - prev_ll) <= config.tol * (1.0 + abs(prev_ll))
            or np.abs(resp - resp_prev).max() < config.tol
        ):
            converged = True
            break
        pi = update_pi(resp)
        sigma = update_sigma(panel, resp, lam)
        if em2:
            new_lam = np.empty_like(lam)
            for g in range(config.n_groups):
                zn = resp[:, g] * panel.n
                zn_uniq = np.bincount(
                    panel.uniq_inv, weights=zn, minlength=panel.uniq_n.size
                )
                t1 = float(
                    zn
                    @ (panel.logdet_scatter - sigma[g].logdet - panel.window * LOG2)
                )
                new_lam[g] = _solve_lambda(
                    panel, zn_uniq, t1, lam_lower, config.lambda_upper,
                    1e-12, guess=lam[g], width=lam_width[g],
                )
                # probes next round must cover a step of this round's size
                lam_width[g] = 4.0 * abs(new_lam[g] - lam[g])
            lam = new_lam
        prev_ll = ll
        resp_prev = resp
    else:
        # ran out of iterations after an M-step; one more E-pass leaves the
        # returned state self-consistent
        resp, lse = _softmax_rows(_log_weight_matrix(panel, pi, sigma, lam))
        trace.append(float(lse.sum()))
    return pi, sigma, lam, resp, np.array(trace), converged


def fit(features, config: WmmConfig) -> WmmFit:
    """Fit the mixture with restarts and keep the best final likelihood.

    Restart r draws its start from a generator seeded by (seed, r), so the
    schedule is reproducible and independent of the group count. A restart
    that collapses a group or hits a singular update is discarded; the fit
    fails only if every restart does.
    """
    panel = _as_panel(features)
    if not isinstance(config, WmmConfig):
        raise ConfigError("config must be a WmmConfig")
    if config.window != panel.window:
        raise ConfigError(
            f"config window {config.window} does not match features ({panel.window})"
        )
    if config.n_groups > panel.size:
        raise ConfigError(
            f"{config.n_groups} groups but only {panel.size} series"
        )
    n_restarts = 1 if config.init == "labels" else config.n_restarts
    best = None
    failures = 0
    last_err = None
    for r in range(n_restarts):
        rng = np.random.default_rng([config.seed, r])
        resp0 = _init_resp(panel, config, rng)
        try:
            result = _run_em(panel, resp0, config)
        except (EmptyClusterError, NotPositiveDefinite, NumericalFailure) as err:
            failures += 1
            last_err = err
            continue
        if best is None or result[4][-1] > best[4][-1]:
            best = result
    if best is None:
        raise type(last_err)(
            f"all {n_restarts} restarts failed; last error: {last_err}"
        )
    pi, sigma, lam, resp, trace, converged = best
    return WmmFit(
        ids=list(panel.ids),
        pi=pi,
        sigma=sigma,
        lam=lam,
        resp=resp,
        labels=np.argmax(resp, axis=1),
        loglik_trace=trace,
        converged=converged,
        n_iter=trace.size,
        n_failed_restarts=failures,
        config=config,
    )
