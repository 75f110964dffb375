import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracsub.errors import DivergenceError, DomainError, StepError
from fracsub.fracweights import CoefficientTable
from fracsub.legendre import SpectralFunction, build_space, interpolate, l2_norm
from fracsub.stepper import (
    ProblemSpec,
    SchemeSpec,
    Startup,
    TimeHistory,
    _factor,
    caputo_cq_apply,
    caputo_cq_apply_telescoped,
    run,
    solution,
    step_linear,
    step_semi_implicit_1,
    step_semi_implicit_2,
)

sin2pi = lambda x: np.sin(2 * np.pi * x)
zero = lambda x: 0.0 * x


@pytest.fixture(scope="module")
def space32():
    return build_space(32)


def norms(space, history):
    return np.array([l2_norm(space, solution(space, history, k)) for k in range(len(history))])


# ---- discrete Caputo operator ----


def scalar_history(values, beta, tau):
    table = CoefficientTable.build(beta, len(values) - 1, tau)
    return TimeHistory.from_levels(table, np.asarray(values, dtype=float))


def test_constant_history_has_zero_derivative():
    h = scalar_history(np.full(9, 3.7), 0.4, 0.1)
    for k in range(9):
        assert np.max(np.abs(caputo_cq_apply(h, k))) <= 1e-14
        assert np.all(caputo_cq_apply_telescoped(h, k) == 0)


def test_linear_surrogate_first_level():
    h = scalar_history([0.0, 1.0], 0.5, 1.0)
    assert caputo_cq_apply(h, 1)[0] == pytest.approx(1.0, rel=1e-15)


def test_power_surrogate_approaches_exact_caputo_derivative():
    # the Caputo derivative of t**beta is Gamma(1 + beta)
    beta = 0.5
    errs = []
    for n in (64, 256, 1024):
        t = np.arange(n + 1) / n
        h = scalar_history(t**beta, beta, 1.0 / n)
        errs.append(abs(caputo_cq_apply(h, n)[0] - math.gamma(1 + beta)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


@settings(max_examples=50, deadline=None)
@given(
    beta=st.floats(min_value=0.05, max_value=0.95),
    n=st.integers(min_value=1, max_value=60),
    seed=st.integers(0, 2**31),
)
def test_weight_and_telescoped_forms_agree(beta, n, seed):
    rng = np.random.default_rng(seed)
    table = CoefficientTable.build(beta, n, rng.uniform(0.01, 1.0))
    h = TimeHistory.from_levels(table, rng.standard_normal((n + 1, 5)))
    for k in range(n + 1):
        a, b = caputo_cq_apply(h, k), caputo_cq_apply_telescoped(h, k)
        scale = max(np.max(np.abs(a)), 1.0)
        assert np.max(np.abs(a - b)) <= 1e-12 * scale


def test_history_bounds():
    table = CoefficientTable.build(0.5, 2, 0.1)
    h = TimeHistory(table, 3)
    h.append(np.ones(3))
    with pytest.raises(IndexError):
        caputo_cq_apply(h, 1)
    h.append(np.ones(3))
    h.append(np.ones(3))
    with pytest.raises(IndexError):
        h.append(np.ones(3))
    with pytest.raises(ValueError):
        h.levels[0, 0] = 5.0
    with pytest.raises(ValueError):
        TimeHistory(table, 3, capacity=4)


# ---- problem and scheme validation ----


def test_problem_validation():
    with pytest.raises(DomainError):
        ProblemSpec(mu=1, beta=0.5, T=1, initial=lambda x: 1 + 0 * x)
    with pytest.raises(DomainError):
        ProblemSpec(mu=1, beta=0.5, T=1, initial=sin2pi, source=lambda x, t: x, reaction=lambda u: u)
    for bad in (dict(mu=0), dict(beta=1.0), dict(T=-1)):
        kw = dict(mu=1, beta=0.5, T=1, initial=sin2pi) | bad
        with pytest.raises(DomainError):
            ProblemSpec(**kw)


def test_scheme_validation():
    with pytest.raises(DomainError):
        SchemeSpec("semi-implicit-2", 1)
    with pytest.raises(DomainError):
        SchemeSpec("linear-p1", 0)
    with pytest.raises(DomainError):
        Startup("explicit")
    with pytest.raises(DomainError):
        Startup("refined", 0)


def test_kind_must_match_forcing(space32):
    linear = ProblemSpec(mu=1, beta=0.5, T=1, initial=sin2pi, source=lambda x, t: x * t)
    nonlinear = ProblemSpec(mu=1, beta=0.5, T=1, initial=sin2pi, reaction=lambda u: u)
    with pytest.raises(DomainError):
        run(linear, SchemeSpec("semi-implicit-1", 4), space32)
    with pytest.raises(DomainError):
        run(nonlinear, SchemeSpec("linear-p1", 4), space32)


# ---- linear schemes ----


@pytest.mark.parametrize("kind", ["linear-p1", "linear-p2"])
def test_zero_is_a_fixed_point(kind, space32):
    p = ProblemSpec(mu=1, beta=0.3, T=1, initial=zero)
    h = run(p, SchemeSpec(kind, 16), space32)
    assert np.all(h.levels == 0)


def test_single_step_history(space32):
    p = ProblemSpec(mu=1, beta=0.3, T=1, initial=zero)
    h = run(p, SchemeSpec("linear-p1", 1), space32)
    assert len(h) == 2 and np.all(h.levels == 0)


def test_near_unit_order_matches_backward_euler():
    space = build_space(24)
    beta, tau, mu = 1 - 1e-6, 0.01, 0.7
    src = lambda x, t: np.exp(t) * np.sin(np.pi * x) * (1 + x)
    p = ProblemSpec(mu=mu, beta=beta, T=tau, initial=sin2pi, source=src)
    u1 = run(p, SchemeSpec("linear-p1", 1), space)[1]

    M, S = space.mass, space.stiffness
    u0 = interpolate(space, sin2pi).modal
    load = space.load_vector(src(space.nodes, tau))
    be = np.linalg.solve(M / tau + mu * S, M @ u0 / tau + load)
    assert np.linalg.norm(u1 - be) <= 1e-4 * np.linalg.norm(be)


@pytest.mark.parametrize("kind", ["linear-p1", "linear-p2"])
def test_discrete_residual_vanishes(kind, space32):
    beta, mu, n = 0.6, 0.8, 12
    src = lambda x, t: np.cos(3 * t) * (1 - x**2) * np.exp(x)
    p = ProblemSpec(mu=mu, beta=beta, T=0.5, initial=sin2pi, source=src)
    h = run(p, SchemeSpec(kind, n), space32)
    tau = 0.5 / n
    M, S = space32.mass, space32.stiffness
    shift = 0.5 * beta if kind == "linear-p2" else 0.0
    for k in range(1, n + 1):
        g = (1 - shift) * src(space32.nodes, k * tau) + shift * src(space32.nodes, (k - 1) * tau)
        u_shift = (1 - shift) * h[k] + shift * h[k - 1]
        res = M @ caputo_cq_apply(h, k) + mu * S @ u_shift - space32.load_vector(g)
        assert np.max(np.abs(res)) <= 1e-10


def test_system_matrix_factored_once(space32):
    p = ProblemSpec(mu=1.3, beta=0.45, T=1, initial=sin2pi)
    _factor.cache_clear()
    run(p, SchemeSpec("linear-p1", 50), space32)
    assert _factor.cache_info().misses == 1


# ---- semi-implicit schemes ----


def test_semi_implicit_with_zero_reaction_equals_linear(space32):
    lin = ProblemSpec(mu=1, beta=0.4, T=1, initial=sin2pi)
    non = ProblemSpec(mu=1, beta=0.4, T=1, initial=sin2pi, reaction=lambda u: 0 * u)
    a = run(lin, SchemeSpec("linear-p1", 40), space32).levels
    b = run(non, SchemeSpec("semi-implicit-1", 40), space32).levels
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


def test_second_order_semi_implicit_with_linear_reaction(space32):
    # f(u) = u: extrapolation is exact and I_N u = u, so each step is a
    # linear solve with the lagged/extrapolated mass load
    beta, mu, n = 0.7, 1.0, 20
    p = ProblemSpec(mu=mu, beta=beta, T=1, initial=sin2pi, reaction=lambda u: u)
    h = run(p, SchemeSpec("semi-implicit-2", n), space32)
    tau = 1.0 / n
    M, S = space32.mass, space32.stiffness
    table = CoefficientTable.build(beta, n, tau)
    A = M / tau**beta + mu * (1 - beta / 2) * S
    for k in range(2, n + 1):
        hist = table.varpi[k:0:-1] @ h.levels[:k] - table.b[k] * h[0]
        load = M @ ((1 - beta / 2) * (2 * h[k - 1] - h[k - 2]) + beta / 2 * h[k - 1])
        rhs = -M @ hist / tau**beta - mu * beta / 2 * S @ h[k - 1] + load
        np.testing.assert_allclose(h[k], np.linalg.solve(A, rhs), atol=1e-12)


def test_step_functions_check_history_length(space32):
    p = ProblemSpec(mu=1, beta=0.5, T=1, initial=sin2pi, reaction=lambda u: u)
    table = CoefficientTable.build(0.5, 4, 0.25)
    h = TimeHistory(table, space32.dim)
    h.append(interpolate(space32, sin2pi).modal)
    with pytest.raises(IndexError):
        step_semi_implicit_1(p, space32, h, 2)
    with pytest.raises(IndexError):
        step_semi_implicit_2(p, space32, h, 1)
    with pytest.raises(DomainError):
        step_linear(p, "linear-p1", space32, h, 1)


REACTION = dict(mu=1, beta=0.5, T=1, initial=sin2pi, reaction=lambda u: u + u**2)


def test_refined_startup_converges_with_factor(space32):
    p = ProblemSpec(**REACTION)
    first = {f: run(p, SchemeSpec("semi-implicit-2", 64, Startup("refined", f)), space32)[1] for f in (1, 16, 64, 1024)}
    one_step = run(p, SchemeSpec("semi-implicit-1", 64), space32)[1]
    np.testing.assert_array_equal(first[1], one_step)
    d16 = np.linalg.norm(first[16] - first[1024])
    d64 = np.linalg.norm(first[64] - first[1024])
    assert d64 < d16


def test_implicit_startup_solves_the_implicit_step(space32):
    p = ProblemSpec(**REACTION)
    n = 64
    u1 = run(p, SchemeSpec("semi-implicit-2", n, Startup("implicit")), space32)[1]
    tau = 1.0 / n
    M, S = space32.mass, space32.stiffness
    u0 = interpolate(space32, sin2pi).modal
    f1 = p.reaction(space32.modal_to_nodal(u1))
    res = (M @ (u1 - u0)) / tau**0.5 + S @ u1 - space32.load_vector(f1)
    assert np.max(np.abs(res)) <= 1e-11


def test_blow_up_is_reported_with_step(space32):
    p = ProblemSpec(mu=0.01, beta=0.5, T=5, initial=lambda x: 50 * (1 - x**2), reaction=lambda u: u**3)
    with pytest.raises(DivergenceError) as info:
        run(p, SchemeSpec("semi-implicit-1", 50), space32)
    assert info.value.step is not None and info.value.step >= 1
    assert isinstance(info.value, StepError)


def test_runs_are_deterministic(space32):
    p = ProblemSpec(mu=1, beta=0.3, T=1, initial=sin2pi, reaction=lambda u: u + u**2)
    a = run(p, SchemeSpec("semi-implicit-2", 32), space32).levels.copy()
    b = run(p, SchemeSpec("semi-implicit-2", 32), space32).levels
    assert np.array_equal(a, b)


def test_first_order_on_reaction_problem():
    space = build_space(32)
    p = ProblemSpec(mu=1, beta=0.9, T=1, initial=sin2pi, reaction=lambda u: u + u**2)
    ref = run(p, SchemeSpec("semi-implicit-1", 2048), space)[-1]
    errs = []
    for n in (32, 64, 128, 256):
        u = run(p, SchemeSpec("semi-implicit-1", n), space)[-1]
        errs.append(l2_norm(space, SpectralFunction(space, u - ref)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    # errors fall monotonically and roughly halve with the step
    assert np.all(ratios > 1)
    assert np.all(np.abs(ratios / 2 - 1) <= 0.15)


# ---- stability on homogeneous data ----

STABILITY_INITIALS = {
    "sin2pi": sin2pi,
    "rough": lambda x: (1 - x**2) * np.exp(3 * x) * np.cos(9 * x),
    "bump": lambda x: (1 - x**2) ** 2,
}


@pytest.mark.parametrize("kind", ["linear-p1", "linear-p2"])
@pytest.mark.parametrize("beta", [0.2, 0.5, 0.9])
@pytest.mark.parametrize("T", [1e-3, 1.0, 1e4])
def test_homogeneous_solution_never_exceeds_initial_norm(kind, beta, T, space32):
    for u0 in STABILITY_INITIALS.values():
        p = ProblemSpec(mu=1, beta=beta, T=T, initial=u0)
        n = norms(space32, run(p, SchemeSpec(kind, 256), space32))
        assert np.all(n <= n[0] * (1 + 1e-10))


@pytest.mark.parametrize("kind", ["linear-p1", "linear-p2"])
@pytest.mark.parametrize("beta", [0.2, 0.5, 0.9])
def test_homogeneous_energy_difference_is_non_positive(kind, beta, space32):
    # D_tau ||u^k||^2 <= 0 is what the energy argument delivers for both orders
    p = ProblemSpec(mu=1, beta=beta, T=1, initial=STABILITY_INITIALS["rough"])
    n = 256
    sq = norms(space32, run(p, SchemeSpec(kind, n), space32)) ** 2
    table = CoefficientTable.build(beta, n, 1.0 / n)
    h = TimeHistory.from_levels(table, sq)
    D = np.array([caputo_cq_apply(h, k)[0] for k in range(1, n + 1)])
    assert np.all(D <= 1e-10 * sq[0] * n**beta)


@pytest.mark.parametrize("beta", [0.2, 0.5, 0.9])
def test_first_order_homogeneous_norm_is_monotone(beta, space32):
    p = ProblemSpec(mu=1, beta=beta, T=1, initial=sin2pi)
    n = norms(space32, run(p, SchemeSpec("linear-p1", 256), space32))
    assert np.all(n[1:] <= n[:-1] * (1 + 1e-10))


def test_shifted_scheme_overshoots_on_stiff_modes(space32):
    # the k - beta/2 weighting damps a stiff mode by a negative factor on the
    # first step, so the norm can dip and recover: bounded but not monotone
    p = ProblemSpec(mu=1, beta=0.2, T=1, initial=sin2pi)
    n = norms(space32, run(p, SchemeSpec("linear-p2", 1024), space32))
    assert n[1] < n[2] <= n[0]
