"""One-parameter Mittag-Leffler function on the non-negative real axis.

Only the truncated power series ``sum z**l / Gamma(1 + l*beta)`` is used;
every term is formed as ``exp(l log z - lgamma(1 + l beta))`` so moderate
arguments (``z`` up to a few tens) never overflow an intermediate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, NonConvergenceError

__all__ = ["MittagLefflerParams", "mlf_eval", "mittag_leffler"]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class MittagLefflerParams:
    beta: float
    rel_tol: float = 1e-14
    max_terms: int = 2000

    def __post_init__(self):
        if not (0.0 < self.beta <= 1.0):
            raise DomainError(f"beta must lie in (0, 1], got {self.beta!r}")
        if self.rel_tol < _EPS:
            raise DomainError(f"rel_tol below machine epsilon: {self.rel_tol!r}")
        if self.max_terms < 10:
            raise DomainError(f"max_terms must be >= 10, got {self.max_terms!r}")


def _series(z, beta, rel_tol, max_terms, block=256):
    if z == 0.0:
        return 1.0
    logz = math.log(z)
    total = 0.0
    for start in range(0, max_terms, block):
        l = np.arange(start, min(start + block, max_terms), dtype=float)
        logterm = l * logz - gammaln(1.0 + l * beta)
        if logterm.max() > 709.0:
            raise OverflowError(f"Mittag-Leffler series term overflows at z={z!r}, beta={beta!r}")
        terms = np.exp(logterm)
        partial = total + np.cumsum(terms)
        done = np.nonzero((terms < rel_tol * partial) & (l > 0))[0]
        if done.size:
            return float(partial[done[0]])
        total = float(partial[-1])
    raise NonConvergenceError(
        f"Mittag-Leffler series did not reach rel_tol={rel_tol} in {max_terms} terms (z={z!r})"
    )


def mlf_eval(params, z):
    """Evaluate ``E_beta(z)`` for scalar or array ``z >= 0``."""
    zarr = np.asarray(z, dtype=float)
    if np.any(zarr < 0) or np.any(~np.isfinite(zarr)):
        raise DomainError("Mittag-Leffler evaluation requires finite z >= 0")
    if zarr.ndim == 0:
        return _series(float(zarr), params.beta, params.rel_tol, params.max_terms)
    out = np.empty_like(zarr)
    for idx, val in np.ndenumerate(zarr):
        out[idx] = _series(float(val), params.beta, params.rel_tol, params.max_terms)
    return out


def mittag_leffler(z, beta, rel_tol=1e-14, max_terms=2000):
    """Convenience wrapper: ``mittag_leffler(z, beta)``."""
    return mlf_eval(MittagLefflerParams(beta, rel_tol, max_terms), z)
