"""Legendre-Galerkin space on (-1, 1) with homogeneous Dirichlet data.

The trial/test basis is ``phi_k = L_k - L_{k+2}`` for ``k = 0..N-2``.  With it
the stiffness matrix is diagonal, ``(phi_k', phi_k') = 4k + 6``, and the mass
matrix only couples ``k`` with ``k +/- 2``.  Nodal data live on the
Legendre-Gauss-Lobatto (LGL) grid of degree ``N``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as npleg

from .errors import DomainError, NonConvergenceError

__all__ = [
    "lgl",
    "legendre_vandermonde",
    "SpectralSpace",
    "SpectralFunction",
    "build_space",
    "interpolate",
    "h10_project",
    "l2_norm",
    "l2_error",
]


def _lgl_newton(N, tol=1e-14, maxiter=100):
    # Chebyshev-Gauss-Lobatto initial guess, ascending
    x = -np.cos(np.pi * np.arange(N + 1) / N)
    P = np.empty((N + 1, N + 1))
    for _ in range(maxiter):
        P[:, 0] = 1.0
        P[:, 1] = x
        for k in range(2, N + 1):
            P[:, k] = ((2 * k - 1) * x * P[:, k - 1] - (k - 1) * P[:, k - 2]) / k
        dx = (x * P[:, N] - P[:, N - 1]) / ((N + 1) * P[:, N])
        x = x - dx
        if np.max(np.abs(dx)) < tol:
            break
    else:
        raise NonConvergenceError(f"LGL Newton iteration did not converge for N={N}")
    x[0], x[-1] = -1.0, 1.0
    x = np.sort(x)
    LN = legendre_vandermonde(x, N)[:, N]
    w = 2.0 / (N * (N + 1) * LN**2)
    return x, w


@lru_cache(maxsize=32)
def lgl(N):
    """LGL nodes (ascending) and quadrature weights of degree ``N``."""
    if N < 1:
        raise DomainError(f"LGL degree must be >= 1, got {N}")
    if N == 1:
        x, w = np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    else:
        x, w = _lgl_newton(N)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def legendre_vandermonde(x, N):
    """Matrix ``V[i, k] = L_k(x_i)`` for ``k = 0..N``."""
    x = np.asarray(x, dtype=float)
    V = np.empty((x.size, N + 1))
    V[:, 0] = 1.0
    if N >= 1:
        V[:, 1] = x
    for k in range(2, N + 1):
        V[:, k] = ((2 * k - 1) * x * V[:, k - 1] - (k - 1) * V[:, k - 2]) / k
    return V


def legendre_derivative_vandermonde(x, N):
    """Matrix ``D[i, k] = L_k'(x_i)`` via ``L_{k+1}' = L_{k-1}' + (2k+1) L_k``."""
    V = legendre_vandermonde(x, N)
    D = np.zeros_like(V)
    if N >= 1:
        D[:, 1] = 1.0
    for k in range(1, N):
        D[:, k + 1] = D[:, k - 1] + (2 * k + 1) * V[:, k]
    return D


def _readonly(a):
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SpectralSpace:
    """Discrete space ``V_N^0`` with its LGL grid and Galerkin matrices."""

    N: int
    nodes: np.ndarray
    quad_weights: np.ndarray
    mass: np.ndarray
    stiffness: np.ndarray
    # L_k(x_i) on the LGL grid and the discrete Legendre transform
    vander: np.ndarray = field(repr=False)
    forward: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.N - 1

    @property
    def mass_diag(self):
        k = np.arange(self.N - 1)
        return 2.0 / (2 * k + 1) + 2.0 / (2 * k + 5)

    @property
    def mass_offdiag(self):
        # (phi_k, phi_{k+2}) for k = 0..N-4
        k = np.arange(max(self.N - 3, 0))
        return -2.0 / (2 * k + 5)

    @property
    def stiffness_diag(self):
        return 4.0 * np.arange(self.N - 1) + 6.0

    def mass_apply(self, a):
        a = np.asarray(a, dtype=float)
        out = self.mass_diag * a
        off = self.mass_offdiag
        if off.size:
            out[:-2] += off * a[2:]
            out[2:] += off * a[:-2]
        return out

    def stiffness_apply(self, a):
        return self.stiffness_diag * np.asarray(a, dtype=float)

    def banded_system(self, alpha, gamma):
        """Upper banded storage (for ``scipy.linalg.cholesky_banded``) of ``alpha*M + gamma*S``."""
        n = self.N - 1
        ab = np.zeros((3, n))
        ab[2] = alpha * self.mass_diag + gamma * self.stiffness_diag
        if n > 2:
            ab[0, 2:] = alpha * self.mass_offdiag
        return ab

    def to_legendre(self, modal):
        """Legendre coefficients ``c_0..c_N`` of ``sum a_k phi_k``."""
        a = np.asarray(modal, dtype=float)
        c = np.zeros(self.N + 1)
        c[: self.N - 1] += a
        c[2:] -= a
        return c

    def from_legendre(self, c):
        """Modal coefficients of a polynomial given by Legendre coefficients.

        Exact when the polynomial vanishes at both endpoints; otherwise the
        top two Legendre modes are silently dropped.
        """
        c = np.asarray(c, dtype=float)
        # c_k = a_k - a_{k-2}  =>  a_k = c_k + a_{k-2}
        a = np.empty(self.N - 1)
        for parity in (0, 1):
            a[parity::2] = np.cumsum(c[parity : self.N - 1 : 2])
        return a

    def nodal_to_legendre(self, g):
        return self.forward @ np.asarray(g, dtype=float)

    def modal_to_nodal(self, modal):
        return self.vander @ self.to_legendre(modal)

    def nodal_to_modal(self, g):
        """Modal coefficients of the interpolant of nodal data vanishing at +/-1."""
        return self.from_legendre(self.nodal_to_legendre(g))

    def load_vector(self, g):
        """Exact ``(I_N g, phi_k)`` for nodal data ``g`` on the LGL grid."""
        c = self.nodal_to_legendre(g)
        gamma = 2.0 / (2 * np.arange(self.N + 1) + 1)
        cg = c * gamma
        return cg[: self.N - 1] - cg[2:]


def build_space(N):
    """Assemble the degree-``N`` Legendre-Galerkin space."""
    if int(N) != N or N < 2:
        raise DomainError(f"polynomial degree must be an integer >= 2, got {N!r}")
    N = int(N)
    x, w = lgl(N)
    V = legendre_vandermonde(x, N)
    # discrete norms of L_k on the LGL grid; exact except the top mode
    gamma = 2.0 / (2 * np.arange(N + 1) + 1)
    gamma[N] = 2.0 / N
    F = (V * w[:, None]).T / gamma[:, None]

    n = N - 1
    k = np.arange(n)
    mass = np.diag(2.0 / (2 * k + 1) + 2.0 / (2 * k + 5))
    if n > 2:
        off = -2.0 / (2 * k[: n - 2] + 5)
        mass[k[: n - 2], k[: n - 2] + 2] = off
        mass[k[: n - 2] + 2, k[: n - 2]] = off
    stiffness = np.diag(4.0 * k + 6.0)
    return SpectralSpace(
        N=N,
        nodes=x,
        quad_weights=w,
        mass=_readonly(mass),
        stiffness=_readonly(stiffness),
        vander=_readonly(V),
        forward=_readonly(F),
    )


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """``sum a_k phi_k`` plus an optional linear boundary lift.

    ``boundary = (g(-1), g(1))`` is zero for members of ``V_N^0``.
    """

    space: SpectralSpace
    modal: np.ndarray
    boundary: tuple = (0.0, 0.0)

    def legendre_coefficients(self):
        c = self.space.to_legendre(self.modal)
        left, right = self.boundary
        c[0] += 0.5 * (left + right)
        c[1] += 0.5 * (right - left)
        return c

    def nodal(self):
        return self.space.vander @ self.legendre_coefficients()

    def __call__(self, x):
        return npleg.legval(np.asarray(x, dtype=float), self.legendre_coefficients())


def _sample(f, x):
    return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).copy()


def interpolate(space, f):
    """LGL interpolant ``I_N f`` as a :class:`SpectralFunction`."""
    g = _sample(f, space.nodes)
    if not np.all(np.isfinite(g)):
        raise DomainError("function is not finite at every LGL node")
    left, right = g[0], g[-1]
    lift = 0.5 * left * (1.0 - space.nodes) + 0.5 * right * (1.0 + space.nodes)
    modal = space.nodal_to_modal(g - lift)
    return SpectralFunction(space, modal, (float(left), float(right)))


def _fine_grid(space):
    return lgl(2 * space.N)


def h10_project(space, f):
    """H^1_0-orthogonal projection of ``f`` (with ``f(+/-1) = 0``) onto ``V_N^0``.

    The load ``(f', phi_k')`` is integrated by parts to ``(2k+3)(f, L_{k+1}')``
    and evaluated by LGL quadrature on a grid of degree ``2N``.
    """
    xf, wf = _fine_grid(space)
    fx = _sample(f, xf)
    N = space.N
    dL = legendre_derivative_vandermonde(xf, N - 1)[:, 1:N]  # L'_1 .. L'_{N-1}
    k = np.arange(N - 1)
    load = (2 * k + 3) * (dL.T @ (wf * fx))
    diag = space.stiffness_diag
    if np.any(diag == 0):
        raise np.linalg.LinAlgError("singular stiffness matrix")
    return SpectralFunction(space, load / diag)


def l2_norm(space, u):
    if u.boundary == (0.0, 0.0):
        return float(np.sqrt(max(u.modal @ space.mass_apply(u.modal), 0.0)))
    xf, wf = _fine_grid(space)
    return float(np.sqrt(wf @ u(xf) ** 2))


def l2_error(space, u, ref):
    """``||u - ref||`` by LGL quadrature of degree ``2N``."""
    xf, wf = _fine_grid(space)
    diff = u(xf) - _sample(ref, xf)
    return float(np.sqrt(wf @ diff**2))
