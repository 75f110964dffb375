"""Convergence studies: one solve per step size, errors at a fixed time, pairwise rates.

A study compares each run either with a known exact solution or with a run on
a much finer time grid in the same spectral space (so the measured error is
purely temporal).  Reports serialise to CSV (``tau,l2_error,order``) and JSON.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Mapping, Optional, Union

import numpy as np
from scipy.special import gamma

from . import __version__
from .errors import ConfigError, DomainError, StepError
from .legendre import SpectralFunction, build_space, l2_error, l2_norm
from .stepper import ProblemSpec, SchemeKind, SchemeSpec, Startup, run

__all__ = [
    "Exact",
    "SelfReference",
    "StudySpec",
    "ReportRow",
    "ConvergenceReport",
    "run_study",
    "observed_orders",
    "manufactured_problem",
    "emit_report",
    "load_report",
]

# relative slack when checking that step sizes tile the time axis
_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class Exact:
    """Reference given by a closed-form ``u(x, t)``."""

    solution: Callable


@dataclass(frozen=True)
class SelfReference:
    """Reference computed by the same scheme with step ``tau_ref`` on degree ``N_ref``."""

    N_ref: int
    tau_ref: float


def _steps(span, tau, what):
    n = span / tau
    m = round(n)
    if m < 1 or abs(n - m) > _GRID_RTOL * max(n, 1.0):
        raise ConfigError(f"{what}: {span!r} is not a whole number of steps of size {tau!r}")
    return m


@dataclass(frozen=True)
class StudySpec:
    """Everything needed to reproduce one convergence table.

    ``check_dominance`` enforces ``tau_ref < min(tau_grid) / 4``; switch it off
    to put ``tau_ref`` itself on the grid (that row then has error zero).
    ``time_norm="max"`` measures ``max_k ||u(t_k) - U^k||`` over all levels up
    to ``eval_time`` instead of the error at ``eval_time`` alone.
    ``description`` is echoed verbatim into the report metadata.
    """

    problem: ProblemSpec
    kind: SchemeKind
    N: int
    tau_grid: tuple
    reference: Union[Exact, SelfReference]
    eval_time: float = 1.0
    startup: Startup = field(default_factory=Startup)
    check_dominance: bool = True
    time_norm: str = "final"
    description: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        object.__setattr__(self, "tau_grid", tuple(float(t) for t in self.tau_grid))
        taus = self.tau_grid
        if any(not t > 0 for t in taus):
            raise ConfigError(f"step sizes must be positive, got {list(taus)}")
        if any(a <= b for a, b in zip(taus, taus[1:])):
            raise ConfigError(f"tau_grid must be strictly descending, got {list(taus)}")
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError(f"N must be an integer >= 2, got {self.N!r}")
        if not (0 < self.eval_time <= self.problem.T * (1 + _GRID_RTOL)):
            raise ConfigError(f"eval_time must lie in (0, T], got {self.eval_time!r}")
        if self.time_norm not in ("final", "max"):
            raise ConfigError(f"time_norm must be 'final' or 'max', got {self.time_norm!r}")
        if self.kind.linear == self.problem.nonlinear:
            want = "an (x, t) source" if self.kind.linear else "a reaction term"
            raise ConfigError(f"{self.kind.value} needs {want}")
        for tau in taus:
            _steps(self.problem.T, tau, "T")
            _steps(self.eval_time, tau, "eval_time")
        ref = self.reference
        if isinstance(ref, SelfReference):
            if ref.N_ref != self.N:
                raise ConfigError(
                    f"self-reference must share the spectral space: N_ref={ref.N_ref} but N={self.N}"
                )
            if not ref.tau_ref > 0:
                raise ConfigError(f"tau_ref must be positive, got {ref.tau_ref!r}")
            if self.check_dominance and taus and not ref.tau_ref < min(taus) / 4:
                raise ConfigError(
                    f"tau_ref={ref.tau_ref!r} does not dominate the grid (needs < {min(taus) / 4!r})"
                )
            for tau in taus:
                _steps(tau, ref.tau_ref, "tau_grid entry")
            _steps(self.problem.T, ref.tau_ref, "T")
        elif not isinstance(ref, Exact):
            raise ConfigError(f"unknown reference type {type(ref).__name__}")

    def echo(self):
        """JSON-friendly summary of the study parameters."""
        p = self.problem
        ref = self.reference
        if isinstance(ref, SelfReference):
            ref_echo = {"type": "self", "N_ref": int(ref.N_ref), "tau_ref": float(ref.tau_ref)}
        else:
            ref_echo = {"type": "exact"}
        return {
            "mu": float(p.mu),
            "beta": float(p.beta),
            "T": float(p.T),
            "forcing": "reaction" if p.nonlinear else ("source" if p.source else "none"),
            "kind": self.kind.value,
            "N": int(self.N),
            "tau_grid": list(self.tau_grid),
            "reference": ref_echo,
            "eval_time": float(self.eval_time),
            "time_norm": self.time_norm,
            "startup": {"kind": self.startup.kind, "factor": int(self.startup.factor)},
            "description": dict(self.description),
        }


@dataclass(frozen=True)
class ReportRow:
    tau: float
    l2_error: float
    order: Optional[float] = None


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple
    metadata: dict

    @property
    def errors(self):
        return [r.l2_error for r in self.rows]

    @property
    def orders(self):
        return [r.order for r in self.rows[1:]]

    def to_dict(self):
        return {"rows": [dataclasses.asdict(r) for r in self.rows], "metadata": self.metadata}


def observed_orders(taus, errors):
    """Pairwise rates ``log(e_{j-1}/e_j) / log(tau_{j-1}/tau_j)``; NaN if an error is zero."""
    out = []
    for j in range(1, len(errors)):
        e0, e1 = errors[j - 1], errors[j]
        if e0 > 0 and e1 > 0:
            out.append(math.log(e0 / e1) / math.log(taus[j - 1] / taus[j]))
        else:
            out.append(math.nan)
    return out


def _solve(problem, kind, startup, space, tau):
    n = _steps(problem.T, tau, "T")
    try:
        return run(problem, SchemeSpec(kind, n, startup), space)
    except StepError as exc:
        exc.tau = tau
        raise


def run_study(spec, clock=None):
    """Run every step size of ``spec`` and collect errors and rates.

    ``clock`` returns the timestamp written to the metadata; it defaults to
    the current UTC time.
    """
    started = (clock or _utc_now)()
    space = build_space(spec.N)
    ref = spec.reference
    ref_history = None
    if isinstance(ref, SelfReference):
        ref_history = _solve(spec.problem, spec.kind, spec.startup, space, ref.tau_ref)

    def level_error(history, k, tau):
        u = np.array(history[k])
        if ref_history is not None:
            diff = u - ref_history[k * _steps(tau, ref.tau_ref, "tau_grid entry")]
            return l2_norm(space, SpectralFunction(space, diff))
        t = k * tau
        return l2_error(space, SpectralFunction(space, u), lambda x: ref.solution(x, t))

    errors = []
    for tau in spec.tau_grid:
        history = _solve(spec.problem, spec.kind, spec.startup, space, tau)
        n_eval = _steps(spec.eval_time, tau, "eval_time")
        levels = range(n_eval + 1) if spec.time_norm == "max" else (n_eval,)
        errors.append(float(max(level_error(history, k, tau) for k in levels)))

    orders = [None] + observed_orders(spec.tau_grid, errors)
    rows = tuple(ReportRow(tau, e, o) for tau, e, o in zip(spec.tau_grid, errors, orders))
    metadata = {
        "study": spec.echo(),
        "version": __version__,
        "started": started,
        "finished": (clock or _utc_now)(),
    }
    return ConvergenceReport(rows, metadata)


def _utc_now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def manufactured_problem(sigma, beta, mu, T=1.0):
    """Linear problem with exact solution ``(1 + t**sigma) sin(pi x)``.

    The source uses the exact Caputo derivative of ``t**sigma``,
    ``Gamma(sigma + 1) / Gamma(sigma + 1 - beta) * t**(sigma - beta)``.
    Returns ``(problem, Exact(u))``.
    """
    if not sigma > beta:
        raise DomainError(f"sigma must exceed beta, got sigma={sigma!r}, beta={beta!r}")
    c = gamma(sigma + 1) / gamma(sigma + 1 - beta)
    lam = mu * np.pi**2

    def exact(x, t):
        return (1.0 + t**sigma) * np.sin(np.pi * np.asarray(x, dtype=float))

    def source(x, t):
        return (c * t ** (sigma - beta) + lam * (1.0 + t**sigma)) * np.sin(np.pi * np.asarray(x, dtype=float))

    problem = ProblemSpec(mu=mu, beta=beta, T=T, initial=lambda x: np.sin(np.pi * x), source=source)
    return problem, Exact(exact)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _csv_text(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["tau", "l2_error", "order"])
    for r in report.rows:
        order = "" if r.order is None else repr(float(r.order))
        w.writerow([repr(float(r.tau)), repr(float(r.l2_error)), order])
    return buf.getvalue()


def _json_text(report):
    d = report.to_dict()
    d["rows"] = [{k: _json_value(v) for k, v in row.items()} for row in d["rows"]]
    return json.dumps(d, indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit_report(report, fmt, path):
    """Write ``report`` as ``"csv"`` or ``"json"``; identical reports give identical bytes."""
    if fmt == "csv":
        text = _csv_text(report)
    elif fmt == "json":
        text = _json_text(report)
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report to {path}: {exc.strerror}") from exc


def load_report(path):
    """Read a JSON report written by :func:`emit_report`."""
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    rows = tuple(
        ReportRow(r["tau"], math.nan if r["l2_error"] is None else r["l2_error"], r["order"])
        for r in d["rows"]
    )
    return ConvergenceReport(rows, d["metadata"])
