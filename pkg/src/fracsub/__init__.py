"""Convolution-quadrature Legendre-Galerkin solvers for 1-D time-fractional
subdiffusion, plus numerical checks of the discrete fractional Gronwall
machinery behind their analysis."""

__version__ = "0.1.0"

from .fracweights import (
    CoefficientTable,
    cq_weights,
    inverse_weights,
    partial_sums,
    gronwall_kernel,
    kernel_sum_closed_form,
)
from .mlf import MittagLefflerParams, mlf_eval, mittag_leffler
from .legendre import SpectralSpace, SpectralFunction, build_space, interpolate, h10_project, l2_norm, l2_error
from .stepper import ProblemSpec, SchemeSpec, SchemeKind, Startup, TimeHistory, run
from .harness import (
    Exact,
    SelfReference,
    StudySpec,
    ConvergenceReport,
    run_study,
    manufactured_problem,
    emit_report,
    load_report,
)

__all__ = [
    "CoefficientTable",
    "cq_weights",
    "inverse_weights",
    "partial_sums",
    "gronwall_kernel",
    "kernel_sum_closed_form",
    "MittagLefflerParams",
    "mlf_eval",
    "mittag_leffler",
    "SpectralSpace",
    "SpectralFunction",
    "build_space",
    "interpolate",
    "h10_project",
    "l2_norm",
    "l2_error",
    "ProblemSpec",
    "SchemeSpec",
    "SchemeKind",
    "Startup",
    "TimeHistory",
    "run",
    "Exact",
    "SelfReference",
    "StudySpec",
    "ConvergenceReport",
    "run_study",
    "manufactured_problem",
    "emit_report",
    "load_report",
]
