"""Generating-function coefficients for the fractional difference operator.

The backward difference of fractional order ``beta`` is built from the Taylor
coefficients of ``(1 - z)**beta``; its discrete inverse from those of
``(1 - z)**(-beta)``.  Both sequences are generated by first-order recurrences,
which are exact up to rounding and never touch the Gamma function.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError

__all__ = [
    "CoefficientTable",
    "cq_weights",
    "inverse_weights",
    "partial_sums",
    "gronwall_kernel",
    "kernel_sum_closed_form",
    "log_gamma_ratio",
]


def _check_beta(beta):
    if not (0.0 < beta < 1.0):
        raise DomainError(f"fractional order must lie in (0, 1), got {beta!r}")


def _check_count(K):
    if int(K) != K or K < 0:
        raise DomainError(f"coefficient count must be a non-negative integer, got {K!r}")


def cq_weights(beta, K):
    """Coefficients ``w_0..w_K`` of ``(1 - z)**beta``.

    ``w_0 = 1`` and ``w_k = w_{k-1} * (k - 1 - beta) / k``.  ``K = 0`` returns
    the single leading coefficient.
    """
    _check_beta(beta)
    _check_count(K)
    k = np.arange(1, int(K) + 1, dtype=float)
    w = np.empty(int(K) + 1)
    w[0] = 1.0
    w[1:] = np.cumprod((k - 1.0 - beta) / k)
    return w


def inverse_weights(beta, K):
    """Coefficients ``r_0..r_K`` of ``(1 - z)**(-beta)``; ``r_k = r_{k-1}(k - 1 + beta)/k``."""
    _check_beta(beta)
    _check_count(K)
    k = np.arange(1, int(K) + 1, dtype=float)
    r = np.empty(int(K) + 1)
    r[0] = 1.0
    r[1:] = np.cumprod((k - 1.0 + beta) / k)
    return r


def partial_sums(varpi):
    """Running sums ``b_k = sum_{j<=k} varpi_j`` of a weight sequence."""
    return np.cumsum(np.asarray(varpi, dtype=float))


@dataclass(frozen=True)
class CoefficientTable:
    """Immutable bundle of all weight sequences for one ``(beta, tau, K)``.

    Build it with :meth:`build`; the arrays are marked read-only so a table
    can be shared freely between runs.
    """

    beta: float
    tau: float
    varpi: np.ndarray
    varrho: np.ndarray
    b: np.ndarray

    @classmethod
    def build(cls, beta, K, tau=1.0):
        if not tau > 0:
            raise DomainError(f"time step must be positive, got {tau!r}")
        varpi = cq_weights(beta, K)
        varrho = inverse_weights(beta, K)
        b = partial_sums(varpi)
        for arr in (varpi, varrho, b):
            arr.flags.writeable = False
        return cls(beta=float(beta), tau=float(tau), varpi=varpi, varrho=varrho, b=b)

    @property
    def K(self):
        return len(self.varpi) - 1

    @property
    def kernel(self):
        """All Gronwall kernel entries ``P_m = tau**beta * varrho_m``."""
        return self.tau ** self.beta * self.varrho


def gronwall_kernel(table, m):
    """Single kernel entry ``P_m = tau**beta * varrho_m``."""
    if m < 0 or m > table.K:
        raise IndexError(f"kernel index {m} outside 0..{table.K}")
    return table.tau ** table.beta * table.varrho[m]


# Stirling coefficients B_{2n} / (2n (2n - 1)) for n = 1..5
_STIRLING = (1.0 / 12, -1.0 / 360, 1.0 / 1260, -1.0 / 1680, 1.0 / 1188)
_STIRLING_MIN_X = 32.0


def log_gamma_ratio(x, a):
    """``log Gamma(x + a) - log Gamma(x)`` for ``x > 0`` and ``x + a > 0``.

    Subtracting two ``gammaln`` values loses about ``eps * log Gamma(x)`` in
    absolute terms, which is ~1e-12 relative near ``x = 500``.  For large
    ``x`` the difference of Stirling series is taken term by term instead, so
    the error stays near machine precision.
    """
    x = np.asarray(x, dtype=float)
    a = np.asarray(a, dtype=float)
    x, a = np.broadcast_arrays(x, a)
    if np.any(x <= 0) or np.any(x + a <= 0):
        raise DomainError("log_gamma_ratio needs x > 0 and x + a > 0")
    out = np.empty(x.shape)
    small = (x < _STIRLING_MIN_X) | (x + a < _STIRLING_MIN_X)
    out[small] = gammaln(x[small] + a[small]) - gammaln(x[small])
    xs, as_ = x[~small], a[~small]
    y = xs + as_
    val = (xs - 0.5) * np.log1p(as_ / xs) + as_ * np.log(y) - as_
    for n, c in enumerate(_STIRLING, start=1):
        p = 2 * n - 1
        # y**-p - x**-p without cancellation
        val += c * -np.expm1(p * np.log1p(as_ / xs)) / (y**p)
    out[~small] = val
    return out if out.ndim else float(out)


def kernel_sum_closed_form(beta, k):
    """``sum_{j<k} varrho_j = Gamma(k + beta) / (Gamma(1 + beta) Gamma(k))``.

    Evaluated in log space so large ``k`` does not overflow.
    """
    _check_beta(beta)
    if int(k) != k or k < 1:
        raise DomainError(f"k must be a positive integer, got {k!r}")
    logval = log_gamma_ratio(float(k), beta) - gammaln(1.0 + beta)
    if logval > np.log(np.finfo(float).max):
        raise OverflowError(f"closed-form kernel sum overflows for beta={beta}, k={k}")
    return float(np.exp(logval))
