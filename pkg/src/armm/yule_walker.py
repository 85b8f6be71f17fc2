"""Autoregressive summaries of fitted group scale matrices.

A group's K x K scale matrix plays the role of an averaged autocovariance
matrix. Partitioning off its first row and column gives the Yule-Walker
system for K-1 autoregressive coefficients; the Schur complement gives the
innovation variance once rescaled by a series' own lag-0 autocovariance.
Coefficient uncertainty comes from a sandwich estimator that weights each
series' design Gram matrix by its responsibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import ConfigError, NotPositiveDefinite
from .features import ScatterFeature
from .wishart import SpdMatrix, as_spd


@dataclass
class GroupArModel:
    """One group's autoregressive read-out (1-based group index)."""

    g: int
    weight: float
    phi: np.ndarray
    coef_cov: np.ndarray
    innovation_scale: float
    sigma2: dict[str, float]

    @property
    def phi_se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.coef_cov))


@dataclass
class ArMixtureModel:
    """Groupwise AR models plus the hard assignment of every series."""

    groups: list[GroupArModel]
    labels: dict[str, int]
    lam: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.groups)


def block_partition(sigma):
    """Split a scale matrix into (q, u, Q).

    q is the top-left scalar, u the remaining first column and Q the
    trailing principal submatrix, returned as an SpdMatrix (its positive
    definiteness is what makes the coefficient solve well-posed).
    """
    sig = as_spd(sigma)
    if sig.dim < 2:
        raise ConfigError("need at least a 2x2 matrix to partition")
    m = sig.entries
    q = float(m[0, 0])
    u = m[1:, 0].copy()
    big_q = SpdMatrix(m[1:, 1:])
    big_q.chol  # validate now, not at first solve
    return q, u, big_q


def yw_coefficients(sigma) -> np.ndarray:
    """Autoregressive coefficients Q^{-1} u from a scale matrix.

    Invariant to rescaling of the matrix, so it reads the same on raw and
    normalized features.
    """
    _, u, big_q = block_partition(sigma)
    return big_q.solve(u)


def yw_innovation_variance(gamma0: float, sigma) -> float:
    """Innovation variance of one series under a group's correlation shape.

    gamma0 * (1 - u' Q^{-1} u / q); the ratio is below one for an SPD
    matrix, so the result is positive whenever gamma0 is.
    """
    gamma0 = float(gamma0)
    if gamma0 < 0:
        raise ConfigError(f"gamma0 must be non-negative, got {gamma0}")
    q, u, big_q = block_partition(sigma)
    schur = q - float(u @ big_q.solve(u))
    if schur <= 0.0:
        raise NotPositiveDefinite("scale matrix has a non-positive Schur complement")
    return gamma0 * schur / q


def sandwich_covariance(features, resp_g, sigma2_g) -> np.ndarray:
    """Sandwich covariance of one group's AR coefficients.

    B = sum_i z_i X_i'X_i and M = sum_i z_i^2 sigma2_i X_i'X_i, with
    X_i'X_i the (K-1) x (K-1) lagged design Gram n_i * toeplitz(gamma_i);
    returns B^{-1} M B^{-1}, symmetrized.
    """
    feats = list(features)
    if len(feats) == 0:
        raise ConfigError("need at least one feature")
    z = np.asarray(resp_g, dtype=float)
    s2 = np.asarray(sigma2_g, dtype=float)
    if z.shape != (len(feats),) or s2.shape != (len(feats),):
        raise ConfigError("resp_g and sigma2_g must have one entry per feature")
    p = feats[0].window - 1
    gram = np.stack([f.n * toeplitz(f.gamma[:p]) for f in feats])
    bread = np.einsum("i,irc->rc", z, gram)
    meat = np.einsum("i,irc->rc", z * z * s2, gram)
    bread = SpdMatrix(bread)
    cov = bread.solve(bread.solve(meat).T)
    return 0.5 * (cov + cov.T)


def assemble_armm(fit, features: list[ScatterFeature]) -> ArMixtureModel:
    """Turn a mixture fit into per-group AR models.

    Coefficients and the group innovation scale come from each group's
    scale matrix; per-series innovation variances are evaluated at the
    series' own lag-0 autocovariance. The sandwich weights use the soft
    responsibilities, the reported sigma2 maps only hard members.
    """
    feats = list(features)
    ids = [f.id for f in feats]
    if ids != list(fit.ids):
        raise ConfigError("features do not line up with the fitted panel")
    gamma0 = np.array([float(f.gamma[0]) for f in feats])
    labels = {sid: int(g) + 1 for sid, g in zip(ids, fit.labels)}
    groups = []
    for g in range(fit.n_groups):
        sig = fit.sigma[g]
        phi = yw_coefficients(sig)
        q, u, big_q = block_partition(sig)
        schur = q - float(u @ big_q.solve(u))
        sigma2_all = gamma0 * (schur / q)
        cov = sandwich_covariance(feats, fit.resp[:, g], sigma2_all)
        members = {
            sid: float(sigma2_all[i])
            for i, sid in enumerate(ids)
            if fit.labels[i] == g
        }
        groups.append(
            GroupArModel(
                g=g + 1,
                weight=float(fit.pi[g]),
                phi=phi,
                coef_cov=cov,
                innovation_scale=float(schur),
                sigma2=members,
            )
        )
    return ArMixtureModel(groups=groups, labels=labels, lam=np.asarray(fit.lam, dtype=float))
