"""JSON run/study configuration with symbolic expressions.

Functions are written as strings in the variables ``x``, ``t`` and ``u``
(e.g. ``"sin(2*pi*x)"``, ``"u + u**2"``) and compiled with sympy.  Numbers
may also be given as strings such as ``"2**-12"``.  Unknown keys are errors
at every level, so a typo never silently falls back to a default.

Problem block::

    {"mu": 1, "beta": 0.2, "T": 1,
     "initial": "sin(2*pi*x)", "reaction": "u + u**2"}      # or "source": "...(x, t)"
    {"mu": 1, "beta": 0.5, "T": 1, "manufactured": {"sigma": 1.5}}

Solve config: ``problem``, ``kind``, ``N``, ``n_steps``, optional ``startup``.
Study config: ``problem``, ``kind``, ``N``, ``tau_grid``, ``reference`` and
optionally ``eval_time``, ``startup``, ``check_dominance``, ``time_norm``.
"""
from __future__ import annotations

import json

import numpy as np
import sympy
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .errors import ConfigError, FracsubError
from .harness import Exact, SelfReference, StudySpec, manufactured_problem
from .stepper import ProblemSpec, SchemeKind, SchemeSpec, Startup

__all__ = ["load_json", "compile_expression", "problem_from_config", "solve_from_config", "study_from_config"]

_SYMBOLS = {name: sympy.Symbol(name, real=True) for name in ("x", "t", "u")}
_NAMES = {**_SYMBOLS, "pi": sympy.pi, "E": sympy.E}


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _parse(text, where):
    if not isinstance(text, (str, int, float)) or isinstance(text, bool):
        raise ConfigError(f"{where}: expected an expression string, got {text!r}")
    try:
        return parse_expr(str(text), local_dict=dict(_NAMES), transformations=standard_transformations)
    except Exception as exc:  # sympy raises a zoo of types on bad input
        raise ConfigError(f"{where}: cannot parse {text!r}: {exc}") from exc


def _lambdify(expr, variables):
    fn = sympy.lambdify([_SYMBOLS[v] for v in variables], expr, "numpy")

    def call(*args):
        args = [np.asarray(a, dtype=float) for a in args]
        return np.broadcast_to(np.asarray(fn(*args), dtype=float), np.broadcast(*args).shape)

    call.expression = str(expr)
    return call


def compile_expression(text, variables, where="expression", derivative=False):
    """Compile ``text`` to a numpy function of ``variables``.

    With ``derivative=True`` also return the compiled derivative in the first
    variable.
    """
    expr = _parse(text, where)
    allowed = {_SYMBOLS[v] for v in variables}
    extra = expr.free_symbols - allowed
    if extra:
        names = ", ".join(sorted(str(s) for s in extra))
        raise ConfigError(f"{where}: {text!r} uses {names}; only {', '.join(variables)} allowed")
    fn = _lambdify(expr, variables)
    if not derivative:
        return fn
    return fn, _lambdify(sympy.diff(expr, _SYMBOLS[variables[0]]), variables)


def _number(value, where, integer=False):
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, str):
        expr = _parse(value, where)
        if expr.free_symbols or not expr.is_number:
            raise ConfigError(f"{where}: {value!r} is not a constant")
        value = float(expr)
    if not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if integer:
        if int(value) != value:
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _check_keys(block, where, required, optional=()):
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object, got {type(block).__name__}")
    unknown = set(block) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(sorted(unknown))}")
    missing = set(required) - set(block)
    if missing:
        raise ConfigError(f"{where}: missing field(s) {', '.join(sorted(missing))}")


def _wrap(where, build, *args, **kwargs):
    try:
        return build(*args, **kwargs)
    except ConfigError:
        raise
    except (FracsubError, ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def problem_from_config(block):
    """Return ``(ProblemSpec, exact_or_None)`` for a problem block."""
    if isinstance(block, dict) and "manufactured" in block:
        _check_keys(block, "problem", ("mu", "beta", "manufactured"), ("T",))
        _check_keys(block["manufactured"], "problem.manufactured", ("sigma",))
        sigma = _number(block["manufactured"]["sigma"], "problem.manufactured.sigma")
        problem, exact = _wrap(
            "problem",
            manufactured_problem,
            sigma,
            _number(block["beta"], "problem.beta"),
            _number(block["mu"], "problem.mu"),
            _number(block.get("T", 1.0), "problem.T"),
        )
        return problem, exact

    _check_keys(block, "problem", ("mu", "beta", "T", "initial"), ("source", "reaction"))
    kwargs = {}
    if "source" in block:
        kwargs["source"] = compile_expression(block["source"], ("x", "t"), "problem.source")
    if "reaction" in block:
        f, df = compile_expression(block["reaction"], ("u",), "problem.reaction", derivative=True)
        kwargs["reaction"], kwargs["reaction_derivative"] = f, df
    problem = _wrap(
        "problem",
        ProblemSpec,
        mu=_number(block["mu"], "problem.mu"),
        beta=_number(block["beta"], "problem.beta"),
        T=_number(block["T"], "problem.T"),
        initial=compile_expression(block["initial"], ("x",), "problem.initial"),
        **kwargs,
    )
    return problem, None


def _startup(block):
    if block is None:
        return Startup()
    _check_keys(block, "startup", ("kind",), ("factor",))
    factor = _number(block.get("factor", 64), "startup.factor", integer=True)
    return _wrap("startup", Startup, block["kind"], factor)


def _kind(value):
    try:
        return SchemeKind(value)
    except ValueError:
        choices = ", ".join(k.value for k in SchemeKind)
        raise ConfigError(f"kind: {value!r} is not one of {choices}") from None


def solve_from_config(cfg):
    """Return ``(ProblemSpec, SchemeSpec, N)`` for a single run."""
    _check_keys(cfg, "config", ("problem", "kind", "N", "n_steps"), ("startup",))
    problem, _ = problem_from_config(cfg["problem"])
    scheme = _wrap(
        "scheme",
        SchemeSpec,
        _kind(cfg["kind"]),
        _number(cfg["n_steps"], "n_steps", integer=True),
        _startup(cfg.get("startup")),
    )
    N = _number(cfg["N"], "N", integer=True)
    if N < 2:
        raise ConfigError(f"N must be >= 2, got {N}")
    return problem, scheme, N


def _reference(block, exact):
    _check_keys(block, "reference", ("type",), ("N_ref", "tau_ref", "solution"))
    kind = block["type"]
    if kind == "self":
        _check_keys(block, "reference", ("type", "N_ref", "tau_ref"))
        return SelfReference(
            _number(block["N_ref"], "reference.N_ref", integer=True),
            _number(block["tau_ref"], "reference.tau_ref"),
        )
    if kind == "exact":
        _check_keys(block, "reference", ("type",), ("solution",))
        if "solution" in block:
            return Exact(compile_expression(block["solution"], ("x", "t"), "reference.solution"))
        if exact is None:
            raise ConfigError("reference: exact reference needs a 'solution' or a manufactured problem")
        return exact
    raise ConfigError(f"reference.type: expected 'self' or 'exact', got {kind!r}")


def study_from_config(cfg):
    """Build a :class:`StudySpec`; the raw config is echoed into the report."""
    _check_keys(
        cfg,
        "config",
        ("problem", "kind", "N", "tau_grid", "reference"),
        ("eval_time", "startup", "check_dominance", "time_norm"),
    )
    problem, exact = problem_from_config(cfg["problem"])
    taus = cfg["tau_grid"]
    if not isinstance(taus, list):
        raise ConfigError("tau_grid: expected a list")
    check = cfg.get("check_dominance", True)
    if not isinstance(check, bool):
        raise ConfigError(f"check_dominance: expected true/false, got {check!r}")
    return _wrap(
        "config",
        StudySpec,
        problem=problem,
        kind=_kind(cfg["kind"]),
        N=_number(cfg["N"], "N", integer=True),
        tau_grid=[_number(t, f"tau_grid[{i}]") for i, t in enumerate(taus)],
        reference=_reference(cfg["reference"], exact),
        eval_time=_number(cfg.get("eval_time", 1.0), "eval_time"),
        startup=_startup(cfg.get("startup")),
        check_dominance=check,
        time_norm=cfg.get("time_norm", "final"),
        description=cfg,
    )
