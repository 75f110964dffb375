"""Numerical certification of the discrete fractional Gronwall machinery.

Three kinds of check live here:

* the telescoping identity ``sum_m P_{k-m} D_tau (v^m)^2 = (v^k)^2 - (v^0)^2``,
  which makes the kernel ``P`` an exact inverse of the difference operator;
* the Mittag-Leffler kernel bound
  ``mu sum_{j<k} P_{k-j} E_beta(mu t_j^beta) <= E_beta(mu t_k^beta) - 1``;
* the Gronwall bound itself, exercised on sequences that saturate (or sit
  below) the recursive hypothesis.

Checks return slacks/residuals rather than booleans so reports can show how
close each case came.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import gammaln, gammasgn

from .errors import DomainError
from .fracweights import (
    CoefficientTable,
    cq_weights,
    inverse_weights,
    kernel_sum_closed_form,
    log_gamma_ratio,
    partial_sums,
)
from .mlf import mittag_leffler

__all__ = [
    "GronwallScenario",
    "GronwallResult",
    "CheckResult",
    "difference_operator",
    "verify_kernel_identity",
    "ml_kernel_bound_slacks",
    "verify_ml_kernel_bound",
    "run_gronwall_scenario",
    "random_scenario",
    "gronwall_sweep",
    "lemma_checks",
    "identity_checks",
    "gronwall_checks",
    "BETAS",
]

BETAS = tuple(round(0.1 * i, 1) for i in range(1, 10))

# small beta needs thousands of series terms even for z of order 3
ML_MAX_TERMS = 100_000


def difference_operator(table, w):
    """``D_tau w`` at every level of a sequence ``w`` (zero at level 0)."""
    w = np.asarray(w, dtype=float)
    n = len(w)
    if n > table.K + 1:
        raise ValueError(f"sequence of length {n} exceeds the table (K={table.K})")
    acc = np.convolve(table.varpi[:n], w - w[0])[:n]
    return acc / table.tau**table.beta


def verify_kernel_identity(table, v):
    """Max over ``k`` of ``|sum_m P_{k-m} D_tau (v^m)^2 - ((v^k)^2 - (v^0)^2)|``."""
    w = np.asarray(v, dtype=float) ** 2
    n = len(w)
    D = difference_operator(table, w)
    lhs = np.convolve(table.kernel[:n], D)[:n]
    return float(np.max(np.abs(lhs - (w - w[0]))))


def ml_kernel_bound_slacks(beta, mu, tau, n_steps):
    """Per-level slack ``E(mu t_k^b) - 1 - mu sum_{j<k} P_{k-j} E(mu t_j^b)``, k = 1..n."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu!r}")
    table = CoefficientTable.build(beta, n_steps, tau)
    t = tau * np.arange(n_steps + 1)
    E = mittag_leffler(mu * t**beta, beta, max_terms=ML_MAX_TERMS)
    conv = np.convolve(table.kernel, E)[: n_steps + 1] - table.kernel[0] * E
    return (E - 1.0 - mu * conv)[1:]


def verify_ml_kernel_bound(beta, mu, tau, n_steps):
    """Minimum slack of the Mittag-Leffler kernel bound over ``1 <= k <= n_steps``."""
    return float(np.min(ml_kernel_bound_slacks(beta, mu, tau, n_steps)))


@dataclass(frozen=True)
class GronwallScenario:
    """Inputs to one Gronwall experiment.

    ``variant="squared"`` builds ``v`` from
    ``D_tau (v^k)^2 <= sum_{l=1}^k lambda_{k-l} (v^l)^2 + v^{k-theta} g^{k-theta}``;
    ``variant="linear"`` from ``D_tau v^k <= sum lambda_{k-l} v^l + g^k``.
    ``fill[k-1]`` in [0, 1] places ``v^k`` between the smallest admissible value
    (0) and the value that turns the hypothesis into an equality (1); the
    default saturates every step.
    """

    beta: float
    tau: float
    n_steps: int
    lambdas: np.ndarray
    lambda_bound: float
    g: np.ndarray
    theta: float = 0.0
    v0: float = 1.0
    variant: str = "squared"
    fill: Optional[np.ndarray] = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        g = np.asarray(self.g, dtype=float)
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "g", g)
        if not (0 < self.beta < 1):
            raise DomainError(f"beta must lie in (0, 1), got {self.beta!r}")
        if self.variant not in ("squared", "linear"):
            raise DomainError(f"unknown variant {self.variant!r}")
        if lam.shape != (self.n_steps,) or g.shape != (self.n_steps + 1,):
            raise DomainError("need n_steps lambdas and n_steps + 1 g values")
        if np.any(lam < 0) or np.any(g < 0) or self.v0 < 0:
            raise DomainError("lambdas, g and v0 must be non-negative")
        if not 0 <= self.theta <= 1:
            raise DomainError(f"theta must lie in [0, 1], got {self.theta!r}")
        if self.lambda_bound < lam.sum() * (1 - 1e-12):
            raise DomainError("lambda_bound must dominate the sum of lambdas")
        if lam.sum() > 0 and self.tau > self.max_tau * (1 + 1e-12):
            raise DomainError(f"tau={self.tau} violates the step restriction tau <= {self.max_tau}")
        if self.fill is not None:
            f = np.asarray(self.fill, dtype=float)
            if f.shape != (self.n_steps,) or np.any(f < 0) or np.any(f > 1):
                raise DomainError("fill must hold n_steps values in [0, 1]")
            object.__setattr__(self, "fill", f)

    @property
    def max_tau(self):
        """Largest step allowed by the restriction ``tau <= (2 lambda (1+beta))^(-1/beta)``."""
        if self.lambda_bound <= 0:
            return math.inf
        return (2 * self.lambda_bound * (1 + self.beta)) ** (-1 / self.beta)


@dataclass(frozen=True)
class GronwallResult:
    v: np.ndarray
    bound: np.ndarray
    violated: bool
    min_slack: float = field(default=math.inf)


def _shifted_g(g, theta):
    # g^{k-theta} = (1-theta) g^k + theta g^{k-1}, with g^{-1} := g^0
    prev = np.concatenate(([g[0]], g[:-1]))
    return (1 - theta) * g + theta * prev


def _build_squared(s, table):
    n = s.n_steps
    inv = 1.0 / s.tau**s.beta
    gs = _shifted_g(s.g, s.theta)
    w = np.zeros(n + 1)
    v = np.zeros(n + 1)
    v[0], w[0] = s.v0, s.v0**2
    a = inv * table.varpi[0] - s.lambdas[0]
    if a <= 0:
        raise DomainError("leading coefficient non-positive: step too large for lambda_0")
    for k in range(1, n + 1):
        H = table.varpi[k - 1 : 0 : -1] @ (w[1:k] - w[0]) if k > 1 else 0.0
        Lam = s.lambdas[k - 1 : 0 : -1] @ w[1:k] if k > 1 else 0.0
        G = gs[k]
        B = -(1 - s.theta) * G
        C = inv * (H - table.varpi[0] * w[0]) - Lam - s.theta * v[k - 1] * G
        disc = B * B - 4 * a * C
        if disc < 0:
            raise DomainError(f"no real root at step {k}: inconsistent scenario")
        root = math.sqrt(disc)
        hi = (-B + root) / (2 * a)
        if hi < 0:
            raise DomainError(f"no non-negative root at step {k}: inconsistent scenario")
        lo = max(0.0, (-B - root) / (2 * a)) if C > 0 else 0.0
        frac = 1.0 if s.fill is None else s.fill[k - 1]
        v[k] = lo + frac * (hi - lo)
        w[k] = v[k] ** 2
    return v


def _build_linear(s, table):
    n = s.n_steps
    inv = 1.0 / s.tau**s.beta
    v = np.zeros(n + 1)
    v[0] = s.v0
    a = inv * table.varpi[0] - s.lambdas[0]
    if a <= 0:
        raise DomainError("leading coefficient non-positive: step too large for lambda_0")
    for k in range(1, n + 1):
        H = table.varpi[k - 1 : 0 : -1] @ (v[1:k] - v[0]) if k > 1 else 0.0
        Lam = s.lambdas[k - 1 : 0 : -1] @ v[1:k] if k > 1 else 0.0
        hi = (inv * (table.varpi[0] * v[0] - H) + Lam + s.g[k]) / a
        if hi < 0:
            raise DomainError(f"no non-negative solution at step {k}: inconsistent scenario")
        frac = 1.0 if s.fill is None else s.fill[k - 1]
        v[k] = frac * hi
    return v


def gronwall_bound(s, table=None):
    """``2 E_beta(2 lambda t_k^beta) (v^0 + max_{m<=k} sum_j P_{m-j} g^{j-theta})`` for every k."""
    table = table or CoefficientTable.build(s.beta, s.n_steps, s.tau)
    n = s.n_steps
    gs = s.g if s.variant == "linear" else _shifted_g(s.g, s.theta)
    acc = np.convolve(table.kernel, gs)[: n + 1]
    running = np.maximum.accumulate(np.concatenate(([0.0], acc[1:])))
    t = s.tau * np.arange(n + 1)
    E = mittag_leffler(2 * s.lambda_bound * t**s.beta, s.beta, max_terms=ML_MAX_TERMS)
    bound = 2 * E * (s.v0 + running)
    bound[0] = s.v0
    return bound


def run_gronwall_scenario(s):
    """Build ``v`` from the hypothesis and compare it with the Gronwall bound."""
    table = CoefficientTable.build(s.beta, s.n_steps, s.tau)
    v = _build_squared(s, table) if s.variant == "squared" else _build_linear(s, table)
    bound = gronwall_bound(s, table)
    slack = bound[1:] - v[1:]
    violated = bool(np.any(v[1:] > bound[1:] * (1 + 1e-12)))
    return GronwallResult(v=v, bound=bound, violated=violated, min_slack=float(slack.min()))


def random_scenario(rng, variant=None, saturate=None):
    """Draw one admissible scenario; step size sits at or below the restriction."""
    beta = float(rng.uniform(0.05, 0.95))
    n = int(rng.integers(8, 65))
    theta = float(rng.choice([0.0, 0.5, 1.0]))
    variant = variant or str(rng.choice(["squared", "linear"]))
    lam_bound = float(rng.uniform(0.0, 5.0))
    lambdas = np.zeros(n)
    support = rng.choice(n, size=int(rng.integers(1, min(n, 4) + 1)), replace=False)
    weights = rng.dirichlet(np.ones(len(support)))
    lambdas[support] = weights * lam_bound * rng.uniform(0.2, 1.0)
    max_tau = (2 * lam_bound * (1 + beta)) ** (-1 / beta) if lam_bound > 0 else 1.0
    tau = float(max_tau * rng.choice([1.0, rng.uniform(0.05, 1.0)]))
    g = rng.uniform(0.0, rng.uniform(0.0, 3.0), size=n + 1)
    v0 = float(rng.uniform(0.0, 2.0))
    saturate = bool(rng.random() < 0.5) if saturate is None else saturate
    fill = None if saturate else rng.uniform(0.0, 1.0, size=n)
    return GronwallScenario(
        beta=beta, tau=tau, n_steps=n, lambdas=lambdas, lambda_bound=lam_bound,
        g=g, theta=theta, v0=v0, variant=variant, fill=fill,
    )


def gronwall_sweep(seed=0, count=500):
    """Run ``count`` random scenarios; returns ``(scenario, result)`` pairs in draw order."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        s = random_scenario(rng)
        out.append((s, run_gronwall_scenario(s)))
    return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    parameters: str
    value: float
    passed: bool

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "passed", bool(self.passed))


def _gamma_ratio(x, a, c):
    """``Gamma(x + a) / (Gamma(c) Gamma(x))`` elementwise, ``c`` a scalar."""
    return gammasgn(c) * np.exp(log_gamma_ratio(x, a) - gammaln(c))


def lemma_checks(K=500, betas=BETAS):
    """Coefficient sign chains, Gamma closed forms, and the Mittag-Leffler kernel bound."""
    out = []
    for beta in betas:
        p = f"beta={beta};K={K}"
        w = cq_weights(beta, K)
        r = inverse_weights(beta, K)
        b = partial_sums(w)
        j = np.arange(K + 1, dtype=float)

        ok = w[0] == 1.0 and bool(np.all(w[1:-1] < w[2:])) and bool(np.all(w[1:] < 0))
        out.append(CheckResult("cq_weight_signs", p, float(np.max(w[1:])), ok))

        ok = r[0] == 1.0 and bool(np.all(r[1:-1] > r[2:])) and bool(np.all(r[1:] > 0))
        out.append(CheckResult("inverse_weight_signs", p, float(np.min(r)), ok))

        gap1 = np.min((j + 1) ** (beta - 1) - r)
        gap2 = np.min(j[1:] ** (beta - 1) - r[1:])
        out.append(CheckResult("inverse_weight_power_bounds", p, float(min(gap1, gap2)), bool(gap1 >= 0 and gap2 >= 0)))

        ok = bool(np.all(b > 0)) and bool(np.all(b[1:] < b[:-1]))
        out.append(CheckResult("partial_sum_signs", p, float(np.min(b)), ok))

        theta = np.convolve(w, r)[: K + 1]
        resid = max(abs(theta[0] - 1.0), float(np.max(np.abs(theta[1:]))))
        out.append(CheckResult("convolution_identity", p, resid, theta[0] == 1.0 and resid <= 1e-13))

        k = j[1:]
        w_ref = _gamma_ratio(k + 1, -1 - beta, -beta)
        r_ref = _gamma_ratio(j + 1, beta - 1, beta)
        b_ref = _gamma_ratio(k, -beta, 1 - beta)
        rel = max(
            float(np.max(np.abs(w[1:] - w_ref) / np.abs(w_ref))),
            float(np.max(np.abs(r - r_ref) / np.abs(r_ref))),
            float(np.max(np.abs(b[:K] - b_ref) / np.abs(b_ref))),
        )
        out.append(CheckResult("gamma_closed_forms", p, rel, rel <= 1e-12))

        sums = np.cumsum(r)
        closed = np.array([kernel_sum_closed_form(beta, int(m)) for m in range(1, K + 1)])
        rel = float(np.max(np.abs(sums[:K] - closed) / closed))
        cap = float(np.min(k**beta / beta - closed))
        out.append(CheckResult("kernel_sum_closed_form", p, rel, rel <= 1e-12 and cap >= 0))

    for beta in (0.2, 0.5, 0.8):
        for mu in (0.5, 1.0, 2.0):
            for tau in (2.0**-4, 2.0**-6):
                slack = verify_ml_kernel_bound(beta, mu, tau, 256)
                p = f"beta={beta};mu={mu};tau={tau!r};n=256"
                out.append(CheckResult("ml_kernel_bound", p, slack, slack >= -1e-12))
    return out


def identity_checks(seed=0, count=1000, n_steps=128, betas=BETAS):
    """Telescoping identity residuals over random sequences, scaled by ``max v^2``."""
    rng = np.random.default_rng(seed)
    tables = {beta: CoefficientTable.build(beta, n_steps, 1.0 / n_steps) for beta in betas}
    out = []
    for beta in betas:
        worst = 0.0
        for _ in range(count):
            scale = 10.0 ** rng.uniform(-3, 3)
            v = scale * rng.standard_normal(n_steps + 1)
            res = verify_kernel_identity(tables[beta], v)
            worst = max(worst, res / np.max(v**2))
        p = f"beta={beta};n={n_steps};samples={count};seed={seed}"
        out.append(CheckResult("kernel_identity", p, worst, worst <= 1e-11))
    return out


def gronwall_checks(seed=0, count=500):
    """Randomised Gronwall scenarios plus the zero-lambda large-step case."""
    results = gronwall_sweep(seed, count)
    violations = sum(r.violated for _, r in results)
    min_slack = min(r.min_slack for _, r in results)
    out = [
        CheckResult(
            "gronwall_random", f"seed={seed};scenarios={count};violations={violations}",
            min_slack, violations == 0,
        )
    ]
    for variant in ("squared", "linear"):
        for theta in (0.0, 0.5, 1.0):
            n = 64
            s = GronwallScenario(
                beta=0.5, tau=10.0, n_steps=n, lambdas=np.zeros(n), lambda_bound=0.0,
                g=np.linspace(0.0, 1.0, n + 1), theta=theta, v0=1.0, variant=variant,
            )
            r = run_gronwall_scenario(s)
            out.append(
                CheckResult("gronwall_zero_lambda_large_tau", f"tau=10;variant={variant};theta={theta}",
                            r.min_slack, not r.violated)
            )
    return out
