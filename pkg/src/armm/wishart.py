"""Symmetric positive definite helpers and the Wishart log-density.

Everything here works in log space. The density is split into a part that
depends on the scale matrix (the kernel) and a part that only depends on the
sample scatter and the degrees of freedom; mixture responsibilities need just
the kernel, model likelihoods need both.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError, DomainError, NotPositiveDefinite

LOG2 = float(np.log(2.0))
LOGPI = float(np.log(np.pi))

# Coefficients of x**(-2k), k = 1.., in the asymptotic expansion of the
# digamma function; truncation error is below 1e-11 once x > 6.
_DIGAMMA_TAIL = (
    -1.0 / 12.0,
    1.0 / 120.0,
    -1.0 / 252.0,
    1.0 / 240.0,
    -1.0 / 132.0,
    691.0 / 32760.0,
    -1.0 / 12.0,
)


class SpdMatrix:
    """Symmetric positive definite matrix with cached factorizations.

    The Cholesky factor is computed on first use and reused for the log
    determinant, linear solves and the explicit inverse. Symmetry is checked
    on construction; positive definiteness is checked by the factorization
    itself.
    """

    __slots__ = ("entries", "_chol", "_inv")

    def __init__(self, entries):
        m = np.atleast_2d(np.asarray(entries, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NotPositiveDefinite("matrix contains non-finite entries")
        scale = np.abs(m).max()
        if scale > 0 and np.abs(m - m.T).max() > 1e-10 * scale:
            raise NotPositiveDefinite("matrix is not symmetric")
        self.entries = 0.5 * (m + m.T)
        self._chol = None
        self._inv = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def chol(self) -> np.ndarray:
        """Lower-triangular Cholesky factor."""
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.entries)
            except np.linalg.LinAlgError:
                raise NotPositiveDefinite(
                    f"Cholesky failed for {self.dim}x{self.dim} matrix"
                ) from None
        return self._chol

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    @property
    def inv(self) -> np.ndarray:
        if self._inv is None:
            self._inv = self.solve(np.eye(self.dim))
        return self._inv

    def solve(self, b) -> np.ndarray:
        """Solve M x = b through the cached Cholesky factor."""
        l = self.chol
        y = np.linalg.solve(l, np.asarray(b, dtype=float))
        return np.linalg.solve(l.T, y)

    def __repr__(self) -> str:
        return f"SpdMatrix({self.entries!r})"


def as_spd(m) -> SpdMatrix:
    """Pass through SpdMatrix instances, wrap anything else."""
    return m if isinstance(m, SpdMatrix) else SpdMatrix(m)


def logdet_spd(m) -> float:
    """Log determinant of an SPD matrix via its Cholesky factor."""
    return as_spd(m).logdet


def digamma(x):
    """Digamma function for positive arguments, elementwise.

    Arguments at or below 6 are shifted up with the recurrence
    psi(x) = psi(x + 1) - 1/x, then the asymptotic series is applied.
    Absolute error stays below 1e-10 across [1e-3, 1e6].
    """
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    work = np.atleast_1d(arr).astype(float, copy=True)
    if not np.all(np.isfinite(work)) or np.any(work <= 0.0):
        raise DomainError("digamma requires finite x > 0")
    acc = np.zeros_like(work)
    small = work <= 6.0
    while np.any(small):
        acc[small] -= 1.0 / work[small]
        work[small] += 1.0
        small = work <= 6.0
    inv2 = 1.0 / (work * work)
    tail = np.zeros_like(work)
    for c in reversed(_DIGAMMA_TAIL):
        tail = (tail + c) * inv2
    out = acc + np.log(work) - 0.5 / work + tail
    return float(out[0]) if scalar else out.reshape(arr.shape)


def _digamma_scalar(x: float) -> float:
    """Scalar twin of `digamma` for hot loops; same shift, same series."""
    if not (math.isfinite(x) and x > 0.0):
        raise DomainError("digamma requires finite x > 0")
    acc = 0.0
    while x <= 6.0:
        acc -= 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    tail = 0.0
    for c in reversed(_DIGAMMA_TAIL):
        tail = (tail + c) * inv2
    return acc + math.log(x) - 0.5 / x + tail


def log_multigamma(k: int, a):
    """Log multivariate gamma: (k(k-1)/4) log pi + sum_j log Gamma(a - j/2).

    Accepts scalar or array `a`; the domain is a > (k - 1)/2.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ConfigError(f"dimension k must be a positive integer, got {k!r}")
    arr = np.asarray(a, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0.5 * (k - 1)):
        raise DomainError(f"log_multigamma requires a > {(k - 1) / 2}")
    offsets = 0.5 * np.arange(k)
    out = 0.25 * k * (k - 1) * LOGPI + gammaln(arr[..., None] - offsets).sum(axis=-1)
    return float(out) if arr.ndim == 0 else out


def wishart_log_kernel(s, sigma, nu: float) -> float:
    """Scale-dependent part of the Wishart log-density.

    log h = (nu/2) logdet(S Sigma^{-1} / 2) - trace(Sigma^{-1} S) / 2,
    the only part that varies across mixture components at fixed S.
    """
    s_ = as_spd(s)
    sig = as_spd(sigma)
    k = s_.dim
    if sig.dim != k:
        raise ConfigError(f"dimension mismatch: S is {k}x{k}, Sigma is {sig.dim}x{sig.dim}")
    tr = float(np.sum(sig.inv * s_.entries))
    return 0.5 * nu * (s_.logdet - sig.logdet - k * LOG2) - 0.5 * tr


def wishart_log_density(s, sigma, nu: float, *, kernel_only: bool = False) -> float:
    """Log-density of the Wishart distribution with nu degrees of freedom.

    Parameters
    ----------
    s : array_like or SpdMatrix
        Observed scatter matrix, SPD, k x k.
    sigma : array_like or SpdMatrix
        Scale matrix, SPD, same dimension.
    nu : float
        Degrees of freedom, must exceed k - 1. Non-integer values are
        accepted.
    kernel_only : bool
        If true, return only the scale-dependent kernel term.
    """
    s_ = as_spd(s)
    k = s_.dim
    nu = float(nu)
    if not np.isfinite(nu) or nu <= k - 1:
        raise DomainError(f"degrees of freedom must exceed {k - 1}, got {nu}")
    logh = wishart_log_kernel(s_, sigma, nu)
    if kernel_only:
        return logh
    logc = -0.5 * (k + 1) * s_.logdet - log_multigamma(k, 0.5 * nu)
    return logc + logh
