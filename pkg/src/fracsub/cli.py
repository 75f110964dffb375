"""Command-line entry point.

Exit codes: 0 success, 1 solver divergence (or a failed verification
check), 2 bad configuration or arguments.
"""
from __future__ import annotations

import argparse
import csv
import sys

from . import __version__
from .config import load_json, solve_from_config, study_from_config
from .errors import ConfigError, FracsubError, NonConvergenceError, StepError
from .fracweights import CoefficientTable
from .harness import emit_report, run_study
from .inequality_lab import gronwall_checks, identity_checks, lemma_checks
from .legendre import build_space, l2_norm
from .mlf import mittag_leffler
from .stepper import run, solution

EXIT_OK, EXIT_DIVERGED, EXIT_CONFIG = 0, 1, 2

_SUITES = {
    "lemmas": lambda seed: lemma_checks(),
    "gronwall": lambda seed: gronwall_checks(seed=seed),
    "identity": lambda seed: identity_checks(seed=seed),
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which matches the config code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _cmd_weights(args, out):
    if args.count < 1:
        raise ConfigError(f"--count must be >= 1, got {args.count}")
    table = CoefficientTable.build(args.beta, args.count - 1, args.tau)
    seq = {"cq": table.varpi, "inverse": table.varrho, "b": table.b, "kernel": table.kernel}[args.kind]
    for v in seq:
        out.write(f"{v:.17g}\n")
    return EXIT_OK


def _cmd_mlf(args, out):
    if not 0 < args.beta <= 1:
        raise ConfigError(f"--beta must lie in (0, 1], got {args.beta}")
    out.write(f"{mittag_leffler(args.z, args.beta):.15g}\n")
    return EXIT_OK


def _cmd_solve(args, out):
    problem, scheme, N = solve_from_config(load_json(args.config))
    space = build_space(N)
    history = run(problem, scheme, space)
    u = solution(space, history)
    out.write(f"t={problem.T!r} steps={scheme.n_steps} l2_norm={l2_norm(space, u)!r}\n")
    if args.dump_solution:
        x, values = space.nodes, u.nodal()
        with open(args.dump_solution, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "u"])
            w.writerows([repr(float(a)), repr(float(b))] for a, b in zip(x, values))
    return EXIT_OK


def _cmd_converge(args, out):
    spec = study_from_config(load_json(args.config))
    report = run_study(spec)
    emit_report(report, "csv", args.out)
    if args.json:
        emit_report(report, "json", args.json)
    out.write("tau,l2_error,order\n")
    for r in report.rows:
        order = "" if r.order is None else f"{r.order:.4f}"
        out.write(f"{r.tau:.6g},{r.l2_error:.6e},{order}\n")
    return EXIT_OK


def _cmd_verify(args, out):
    results = _SUITES[args.suite](args.seed)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["check_name", "parameters", "slack_or_residual", "pass"])
    for r in results:
        w.writerow([r.name, r.parameters, repr(r.value), "true" if r.passed else "false"])
    return EXIT_OK if all(r.passed for r in results) else EXIT_DIVERGED


def build_parser():
    p = _Parser(prog="fracsub", description="Fractional subdiffusion solvers and checks.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    w = sub.add_parser("weights", help="print generating-function coefficients")
    w.add_argument("--beta", type=float, required=True)
    w.add_argument("--count", type=int, required=True, help="number of coefficients printed")
    w.add_argument("--kind", choices=("cq", "inverse", "b", "kernel"), default="cq")
    w.add_argument("--tau", type=float, default=1.0, help="step size (kernel only)")
    w.set_defaults(func=_cmd_weights)

    m = sub.add_parser("mlf", help="evaluate the Mittag-Leffler function")
    m.add_argument("--beta", type=float, required=True)
    m.add_argument("--z", type=float, required=True)
    m.set_defaults(func=_cmd_mlf)

    s = sub.add_parser("solve", help="run one simulation from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--dump-solution", metavar="PATH")
    s.set_defaults(func=_cmd_solve)

    c = sub.add_parser("converge", help="run a convergence study")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True, help="CSV report path")
    c.add_argument("--json", metavar="PATH", help="also write the JSON report")
    c.set_defaults(func=_cmd_converge)

    v = sub.add_parser("verify", help="run a certification suite")
    v.add_argument("--suite", choices=tuple(_SUITES), required=True)
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (StepError, NonConvergenceError) as exc:
        print(f"fracsub: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (FracsubError, ValueError) as exc:
        print(f"fracsub: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"fracsub: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
