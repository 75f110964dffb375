"""Time stepping for ``D^beta u = mu u_xx + f`` on (-1, 1) with zero Dirichlet data.

The Caputo derivative is replaced by the convolution quadrature

    D_tau u^k = tau**-beta * sum_{j=0}^{k} w_{k-j} (u^j - u^0),

with ``w`` the coefficients of ``(1 - z)**beta``.  Four schemes are offered:

* ``linear-p1``  diffusion and source at ``t_k``;
* ``linear-p2``  diffusion and source at the shifted level ``k - beta/2``;
* ``semi-implicit-1``  ``f(u)`` lagged one step;
* ``semi-implicit-2``  shifted diffusion plus extrapolated ``f(2u^{k-1} - u^{k-2})``.

Every step is a single banded SPD solve with a matrix that is fixed for the
whole run, so it is factored once.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_solve_banded, cholesky_banded

from .errors import DivergenceError, DomainError, NonConvergenceError, StepError
from .fracweights import CoefficientTable
from .legendre import SpectralFunction, interpolate

__all__ = [
    "SchemeKind",
    "Startup",
    "SchemeSpec",
    "ProblemSpec",
    "TimeHistory",
    "caputo_cq_apply",
    "caputo_cq_apply_telescoped",
    "step_linear",
    "step_semi_implicit_1",
    "step_semi_implicit_2",
    "run",
    "solution",
    "BLOWUP_THRESHOLD",
]

BLOWUP_THRESHOLD = 1e12


class SchemeKind(str, enum.Enum):
    LINEAR_P1 = "linear-p1"
    LINEAR_P2 = "linear-p2"
    SEMI_IMPLICIT_1 = "semi-implicit-1"
    SEMI_IMPLICIT_2 = "semi-implicit-2"

    @property
    def shifted(self):
        """True for the second-order (``k - beta/2``) family."""
        return self in (SchemeKind.LINEAR_P2, SchemeKind.SEMI_IMPLICIT_2)

    @property
    def linear(self):
        return self in (SchemeKind.LINEAR_P1, SchemeKind.LINEAR_P2)


@dataclass(frozen=True)
class Startup:
    """How ``u^1`` is produced for ``semi-implicit-2``.

    ``"refined"`` takes ``factor`` first-order semi-implicit sub-steps on
    ``[0, tau]``; ``"implicit"`` solves one first-order step with ``f(u^1)``
    treated implicitly by fixed-point iteration.
    """

    kind: str = "refined"
    factor: int = 64

    def __post_init__(self):
        if self.kind not in ("refined", "implicit"):
            raise DomainError(f"unknown startup kind {self.kind!r}")
        if self.kind == "refined" and (int(self.factor) != self.factor or self.factor < 1):
            raise DomainError(f"refinement factor must be a positive integer, got {self.factor!r}")


@dataclass(frozen=True)
class SchemeSpec:
    kind: SchemeKind
    n_steps: int
    startup: Startup = field(default_factory=Startup)

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise DomainError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if self.kind is SchemeKind.SEMI_IMPLICIT_2 and self.n_steps < 2:
            raise DomainError("semi-implicit-2 needs at least two steps")


@dataclass(frozen=True)
class ProblemSpec:
    """Model problem data.

    ``source(x, t)`` gives a linear forcing, ``reaction(u)`` a nonlinear one;
    with neither the forcing is zero.  ``reaction_derivative`` is optional and
    only used for diagnostics.
    """

    mu: float
    beta: float
    T: float
    initial: Callable
    source: Optional[Callable] = None
    reaction: Optional[Callable] = None
    reaction_derivative: Optional[Callable] = None

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu!r}")
        if not (0.0 < self.beta < 1.0):
            raise DomainError(f"beta must lie in (0, 1), got {self.beta!r}")
        if not self.T > 0:
            raise DomainError(f"T must be positive, got {self.T!r}")
        if self.source is not None and self.reaction is not None:
            raise DomainError("give either a linear source or a reaction term, not both")
        ends = np.asarray(self.initial(np.array([-1.0, 1.0])), dtype=float)
        if np.max(np.abs(ends)) > 1e-10:
            raise DomainError(f"initial data must vanish at x = +/-1, got {ends.tolist()}")

    @property
    def nonlinear(self):
        return self.reaction is not None


class TimeHistory:
    """Modal solution vectors ``u^0, u^1, ...`` with the weights that convolve them.

    Storage is preallocated for ``capacity`` levels; ``levels`` is a read-only
    view of the ones filled so far.
    """

    def __init__(self, table, dim, capacity=None):
        capacity = table.K + 1 if capacity is None else capacity
        if capacity > table.K + 1:
            raise ValueError("history cannot hold more levels than the weight table covers")
        self.table = table
        self._data = np.zeros((capacity, dim))
        self._count = 0

    @classmethod
    def from_levels(cls, table, levels):
        levels = np.asarray(levels, dtype=float)
        if levels.ndim == 1:
            levels = levels[:, None]
        h = cls(table, levels.shape[1], levels.shape[0])
        for u in levels:
            h.append(u)
        return h

    def append(self, u):
        if self._count >= self._data.shape[0]:
            raise IndexError("time history is full")
        self._data[self._count] = u
        self._count += 1

    def __len__(self):
        return self._count

    def __getitem__(self, k):
        return self.levels[k]

    @property
    def levels(self):
        view = self._data[: self._count]
        view.flags.writeable = False
        return view

    @property
    def final(self):
        return self._data[self._count - 1].copy()


def _check_level(history, k):
    if k < 0 or k >= len(history):
        raise IndexError(f"level {k} not stored (history holds 0..{len(history) - 1})")


def caputo_cq_apply(history, k):
    """``tau**-beta * sum_{j<=k} w_{k-j} (u^j - u^0)``."""
    _check_level(history, k)
    t = history.table
    L = history._data
    acc = t.varpi[k::-1] @ L[: k + 1] - t.b[k] * L[0]
    return acc / t.tau**t.beta


def caputo_cq_apply_telescoped(history, k):
    """Same operator written as ``tau**-beta * sum_{j=1}^{k} b_{k-j} (u^j - u^{j-1})``."""
    _check_level(history, k)
    t = history.table
    L = history._data
    if k == 0:
        return np.zeros(L.shape[1])
    acc = t.b[k - 1 :: -1] @ np.diff(L[: k + 1], axis=0)
    return acc / t.tau**t.beta


def _history_term(history, k):
    # sum_{j<k} w_{k-j} u^j - b_k u^0, i.e. D_tau u^k * tau**beta without the u^k term
    t = history.table
    L = history._data
    return t.varpi[k:0:-1] @ L[:k] - t.b[k] * L[0]


@lru_cache(maxsize=32)
def _factor(space, mass_coef, stiff_coef):
    ab = space.banded_system(mass_coef, stiff_coef)
    cb = cholesky_banded(ab, lower=False)
    cb.flags.writeable = False
    return cb


def _system(space, table, mu, shifted):
    beta = table.beta
    mass_coef = table.varpi[0] / table.tau**beta
    stiff_coef = mu * (1.0 - 0.5 * beta) if shifted else mu
    return _factor(space, float(mass_coef), float(stiff_coef))


def _guard(nodal, k):
    if not np.all(np.isfinite(nodal)) or np.max(np.abs(nodal)) > BLOWUP_THRESHOLD:
        raise DivergenceError("nodal values exceeded the blow-up threshold", step=k)


def _explicit_rhs(space, table, mu, shifted, history, k):
    """Everything on the right except the forcing load."""
    rhs = -space.mass_apply(_history_term(history, k)) / table.tau**table.beta
    if shifted:
        rhs -= mu * 0.5 * table.beta * space.stiffness_apply(history._data[k - 1])
    return rhs


def _check_step(history, k):
    if k < 1:
        raise IndexError("steps start at k = 1")
    if len(history) != k:
        raise IndexError(f"history must hold exactly levels 0..{k - 1} to compute level {k}")


def _f_nodal(problem, nodal, k):
    _guard(nodal, k)
    vals = np.asarray(problem.reaction(nodal), dtype=float)
    return np.broadcast_to(vals, nodal.shape)


def step_linear(problem, scheme, space, history, k):
    """Level ``k`` of the linear scheme (``p = 1`` or ``p = 2``)."""
    kind = SchemeKind(scheme.kind if isinstance(scheme, SchemeSpec) else scheme)
    if not kind.linear:
        raise DomainError(f"step_linear does not handle {kind.value}")
    if problem.nonlinear:
        raise DomainError("linear schemes need a linear (x, t) source")
    _check_step(history, k)
    table = history.table
    rhs = _explicit_rhs(space, table, problem.mu, kind.shifted, history, k)
    if problem.source is not None:
        x = space.nodes
        g = np.asarray(problem.source(x, k * table.tau), dtype=float)
        if kind.shifted:
            g = (1 - 0.5 * table.beta) * g + 0.5 * table.beta * np.asarray(
                problem.source(x, (k - 1) * table.tau), dtype=float
            )
        rhs += space.load_vector(np.broadcast_to(g, x.shape))
    return cho_solve_banded((_system(space, table, problem.mu, kind.shifted), False), rhs)


def step_semi_implicit_1(problem, space, history, k, _prev_nodal=None):
    """Level ``k`` with diffusion implicit and ``f(u^{k-1})`` explicit."""
    _check_step(history, k)
    table = history.table
    rhs = _explicit_rhs(space, table, problem.mu, False, history, k)
    if problem.reaction is not None:
        prev = space.modal_to_nodal(history._data[k - 1]) if _prev_nodal is None else _prev_nodal
        rhs += space.load_vector(_f_nodal(problem, prev, k))
    return cho_solve_banded((_system(space, table, problem.mu, False), False), rhs)


def step_semi_implicit_2(problem, space, history, k, _prev_nodal=None):
    """Level ``k >= 2`` with shifted diffusion and extrapolated reaction."""
    if k < 2:
        raise IndexError("semi-implicit-2 steps start at k = 2")
    _check_step(history, k)
    table = history.table
    beta = table.beta
    rhs = _explicit_rhs(space, table, problem.mu, True, history, k)
    if problem.reaction is not None:
        if _prev_nodal is None:
            n1 = space.modal_to_nodal(history._data[k - 1])
            n2 = space.modal_to_nodal(history._data[k - 2])
        else:
            n1, n2 = _prev_nodal
        g = (1 - 0.5 * beta) * _f_nodal(problem, 2.0 * n1 - n2, k) + 0.5 * beta * _f_nodal(problem, n1, k)
        rhs += space.load_vector(g)
    return cho_solve_banded((_system(space, table, problem.mu, True), False), rhs)


def _implicit_first_step(problem, space, history, tol=1e-13, maxiter=200):
    table = history.table
    rhs0 = _explicit_rhs(space, table, problem.mu, False, history, 1)
    cb = _system(space, table, problem.mu, False)
    u = history._data[0].copy()
    for _ in range(maxiter):
        rhs = rhs0
        if problem.reaction is not None:
            rhs = rhs0 + space.load_vector(_f_nodal(problem, space.modal_to_nodal(u), 1))
        new = cho_solve_banded((cb, False), rhs)
        delta = np.sqrt(np.sum((new - u) ** 2))
        u = new
        if delta <= tol * max(np.sqrt(np.sum(u**2)), 1.0):
            return u
    raise NonConvergenceError("fixed-point iteration for the implicit first step did not converge")


def _startup(problem, scheme, space, history):
    tau = problem.T / scheme.n_steps
    if scheme.startup.kind == "implicit":
        return _implicit_first_step(problem, space, history)
    sub_problem = replace(problem, T=tau)
    sub = run(sub_problem, SchemeSpec(SchemeKind.SEMI_IMPLICIT_1, scheme.startup.factor), space)
    return sub.final


def run(problem, scheme, space):
    """Advance ``n_steps`` levels and return the full history."""
    n = scheme.n_steps
    tau = problem.T / n
    kind = scheme.kind
    if kind.linear and problem.nonlinear:
        raise DomainError(f"{kind.value} needs a linear source, got a reaction term")
    if not kind.linear and problem.source is not None:
        raise DomainError(f"{kind.value} needs a reaction term, got an (x, t) source")
    table = CoefficientTable.build(problem.beta, n, tau)
    history = TimeHistory(table, space.dim, n + 1)
    history.append(interpolate(space, problem.initial).modal)

    nodal = [space.modal_to_nodal(history[0])]  # nodal values of the last levels
    for k in range(1, n + 1):
        try:
            if kind.linear:
                u = step_linear(problem, kind, space, history, k)
            elif kind is SchemeKind.SEMI_IMPLICIT_1:
                u = step_semi_implicit_1(problem, space, history, k, _prev_nodal=nodal[-1])
            elif k == 1:
                u = _startup(problem, scheme, space, history)
            else:
                u = step_semi_implicit_2(problem, space, history, k, _prev_nodal=(nodal[-1], nodal[-2]))
            u_nodal = space.modal_to_nodal(u)
            _guard(u_nodal, k)
        except StepError as exc:
            if exc.step is None or exc.step != k:
                exc.step = k
            raise
        except (np.linalg.LinAlgError, NonConvergenceError, FloatingPointError) as exc:
            raise StepError(f"{kind.value} step failed: {exc}", step=k) from exc
        history.append(u)
        nodal = [nodal[-1], u_nodal]
    return history


def solution(space, history, k=-1):
    """Level ``k`` of a history as a :class:`SpectralFunction`."""
    return SpectralFunction(space, np.array(history[k]))
