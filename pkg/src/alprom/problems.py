"""Right-hand sides, exact solutions and the full-order reference solver.

Two evolution laws ``du/dt = F(u)`` are supported: KdV ``F = -6 u u_x - u_xxx``
on a uniform 1D mesh and Fisher-KPP ``F = Lap(u) + alpha u (1 - u)`` in 1D
or 2D.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigError, MeshError, NumericalError
from .mesh import DIRICHLET, NEUMANN, FemSpace, Mesh

KDV = "kdv"
FKPP = "fkpp"

T_DOMAIN_RECTS = ((2.0, 3.0, 0.0, 2.0), (0.0, 5.0, 2.0, 3.0))


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    alpha: float = 0.0
    boundary: str = DIRICHLET
    domain: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.kind.strip().lower()
        object.__setattr__(self, "kind", kind)
        if kind not in (KDV, FKPP):
            raise ConfigError(f"unknown problem kind {self.kind!r}")
        if kind == FKPP and not self.alpha > 0:
            raise ConfigError("FKPP needs a positive reaction rate alpha")

    def rhs(self, fem: FemSpace, u) -> np.ndarray:
        if self.kind == KDV:
            return kdv_rhs(fem, u)
        return fkpp_rhs(fem, u, self.alpha)


@dataclass(frozen=True, eq=False)
class SolitonData:
    """Scattering data of a reflectionless multi-soliton: weights ``c`` and wavenumbers ``k``."""

    c: np.ndarray
    k: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        k = np.atleast_1d(np.asarray(self.k, dtype=float))
        if c.shape != k.shape or c.ndim != 1 or c.size == 0:
            raise ValueError("c and k must be non-empty vectors of equal length")
        if np.any(c <= 0) or np.any(k <= 0):
            raise ValueError("c and k must be positive")
        if np.any(np.diff(k) <= 0):
            raise ValueError("k must be strictly increasing")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "k", k)

    @property
    def count(self) -> int:
        return self.c.size


THREE_SOLITON_DATA = SolitonData(c=[0.05, 0.15, 10.0], k=[1.0, 1.5, 1.75])


# --- finite differences on uniform 1D grids ---------------------------------

def uniform_spacing(mesh: Mesh, rtol: float = 1e-9) -> float:
    if mesh.dimension != 1:
        raise MeshError("finite differences need a 1D mesh")
    x = mesh.x
    order = np.argsort(x)
    if not np.array_equal(order, np.arange(len(x))):
        raise MeshError("1D nodes must be numbered left to right")
    dx = np.diff(x)
    h = float(dx.mean())
    if np.abs(dx - h).max() > rtol * h:
        raise MeshError("finite differences need a uniform mesh")
    return h


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Weights ``w`` with ``sum w_j f(x + o_j h) = h^order f^(order)(x) + ...``."""
    o = np.asarray(offsets, dtype=float)
    n = len(o)
    vander = np.array([o**q / factorial(q) for q in range(n)])
    rhs = np.zeros(n)
    rhs[order] = 1.0
    return np.linalg.solve(vander, rhs)


def _apply_stencil(f, h, order, centered, left, right):
    """Derivative of nodal data ``f`` (vector or columns) with per-node stencils.

    ``centered`` is used wherever it fits; ``left[i]`` / ``right[i]`` are the
    stencils for the i-th node from each end.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[0]
    out = np.zeros_like(f)
    lo, hi = -min(centered), max(centered)
    if n < len(centered) + 2 * lo:
        raise MeshError("mesh too small for the finite-difference stencils")
    w = fd_weights(tuple(centered), order)
    for wj, oj in zip(w, centered):
        out[lo:n - hi] += wj * f[lo + oj:n - hi + oj]
    for i, offs in enumerate(left):
        out[i] = np.tensordot(fd_weights(tuple(offs), order), f[[i + o for o in offs]], axes=1)
    for i, offs in enumerate(right):
        j = n - 1 - i
        out[j] = np.tensordot(fd_weights(tuple(offs), order), f[[j + o for o in offs]], axes=1)
    return out / h**order


def fd_first_derivative(f, h):
    """Centered 3-point first derivative; one-sided 3-point at the ends."""
    return _apply_stencil(f, h, 1, (-1, 0, 1), [(0, 1, 2)], [(-2, -1, 0)])


def fd_third_derivative(f, h):
    """Centered 5-point third derivative; second-order one-sided stencils near the ends."""
    return _apply_stencil(f, h, 3, (-2, -1, 0, 1, 2),
                          [(0, 1, 2, 3, 4), (-1, 0, 1, 2, 3)],
                          [(-4, -3, -2, -1, 0), (-3, -2, -1, 0, 1)])


# --- right-hand sides --------------------------------------------------------

def kdv_rhs(fem: FemSpace, u) -> np.ndarray:
    """Nodal ``-6 u u_x - u_xxx``, zero on the two boundary nodes."""
    h = uniform_spacing(fem.mesh)
    u = fem.check_field(u, "u")
    f = -6.0 * u * fd_first_derivative(u, h) - fd_third_derivative(u, h)
    f[fem.mesh.boundary_nodes] = 0.0
    return f


def lumped_laplacian(fem: FemSpace, u) -> np.ndarray:
    return -(fem.stiffness @ u) / fem.lumped_mass


def fkpp_rhs(fem: FemSpace, u, alpha: float) -> np.ndarray:
    """Nodal ``Lap(u) + alpha u (1 - u)`` with a lumped-mass Laplacian."""
    u = fem.check_field(u, "u")
    f = lumped_laplacian(fem, u) + alpha * u * (1.0 - u)
    if fem.mesh.boundary_kind == DIRICHLET:
        f[fem.mesh.boundary_nodes] = 0.0
    return f


# --- exact solutions ---------------------------------------------------------

def exact_one_soliton(x, t, beta, x0=0.0):
    """Soliton of speed ``beta`` and height ``beta / 2`` centred at ``x0 + beta t``."""
    x = np.asarray(x, dtype=float)
    return 0.5 * beta / np.cosh(0.5 * np.sqrt(beta) * (x - x0 - beta * t)) ** 2


def multi_soliton_logdet(x, t, data: SolitonData) -> np.ndarray:
    """log det(I + A(x, t)) with ``A_mn = c_m c_n / (k_m + k_n) exp(th_m + th_n)``.

    ``th_m = k_m x - 4 k_m^3 t``. The matrix is rescaled by ``exp(max(th_m, 0))``
    per row and column before a Cholesky factorization, so no entry overflows.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    k, c = data.k, data.c
    theta = np.outer(x, k) - 4.0 * k**3 * t
    big = np.maximum(theta, 0.0)
    e = np.exp(theta - big)
    cauchy = np.outer(c, c) / (k[:, None] + k[None, :])
    mat = e[:, :, None] * cauchy * e[:, None, :]
    idx = np.arange(k.size)
    mat[:, idx, idx] += np.exp(-2.0 * big)
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("scaled soliton matrix is not positive definite") from exc
    return 2.0 * big.sum(axis=1) + 2.0 * np.log(np.diagonal(chol, axis1=1, axis2=2)).sum(axis=1)


def exact_multi_soliton(x, t, data: SolitonData, h: float = 1e-3) -> np.ndarray:
    """``2 d2/dx2 log det(I + A)`` by a 4th-order central difference of spacing ``h``."""
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    f = [multi_soliton_logdet(flat + j * h, t, data) for j in (-2, -1, 0, 1, 2)]
    d2 = (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h)
    out = 2.0 * d2
    if not np.all(np.isfinite(out)):
        raise NumericalError("non-finite multi-soliton value")
    return out.reshape(x.shape)


def exact_three_soliton(x, t, data: SolitonData = THREE_SOLITON_DATA, h: float = 1e-3):
    return exact_multi_soliton(x, t, data, h)


# --- initial data ------------------------------------------------------------

def fkpp1d_initial(x, width=100.0, centers=(0.25, 0.75)):
    x = np.asarray(x, dtype=float)
    return sum(np.exp(-width * (x - c) ** 2) for c in centers)


def gaussian_2d(nodes, center=(2.5, 0.5), width=50.0):
    nodes = np.asarray(nodes, dtype=float)
    r2 = ((nodes - np.asarray(center)) ** 2).sum(axis=1)
    return np.exp(-width * r2)


# --- full-order FKPP reference -------------------------------------------------

def fkpp_reference_solve(fem: FemSpace, u0, alpha: float, dt: float, n_steps: int,
                         invariant_tol: float = 1e-6) -> np.ndarray:
    """Crank-Nicolson diffusion with Adams-Bashforth 2 reaction, lumped mass.

    The first step treats the reaction with explicit Euler. Dirichlet nodes are
    held at zero. Returns an array of shape ``(n_steps + 1, N)``. With Neumann
    boundaries a RuntimeWarning is issued the first time the solution leaves
    ``[0, 1]`` by more than ``invariant_tol``; Dirichlet data are not monitored
    since clamping the boundary nodes of a nonzero datum makes a small undershoot
    expected.
    """
    if not dt > 0:
        raise ConfigError("dt must be positive")
    u = fem.check_field(u0, "u0").copy()
    free = fem.free
    if fem.mesh.boundary_kind == DIRICHLET:
        u[fem.mesh.boundary_nodes] = 0.0
    ml = sp.diags(fem.lumped_mass)
    lhs = fem.constrained((ml + 0.5 * dt * fem.stiffness).tocsr()).tocsc()
    explicit = (ml - 0.5 * dt * fem.stiffness).tocsr()
    try:
        lu = spla.splu(lhs)
    except RuntimeError as exc:
        raise NumericalError(f"reference solver factorization failed: {exc}") from exc
    traj = np.empty((n_steps + 1, fem.n_nodes))
    traj[0] = u
    react_old = None
    warned = fem.mesh.boundary_kind != NEUMANN or bool(np.any((u < -invariant_tol) | (u > 1 + invariant_tol)))
    for s in range(n_steps):
        react = alpha * fem.lumped_mass * u * (1.0 - u)
        r = react if react_old is None else 1.5 * react - 0.5 * react_old
        rhs = explicit @ u + dt * r
        new = np.zeros_like(u)
        new[free] = lu.solve(rhs[free])
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"reference solution diverged at step {s + 1}")
        if not warned and np.any((new < -invariant_tol) | (new > 1 + invariant_tol)):
            warnings.warn(f"reference solution left [0, 1] at step {s + 1} "
                          f"(range {new.min():.3g}..{new.max():.3g})", RuntimeWarning, stacklevel=2)
            warned = True
        react_old, u = react, new
        traj[s + 1] = u
    return traj
