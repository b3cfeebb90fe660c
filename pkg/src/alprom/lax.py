"""Reduced Lax propagator on the current eigenbasis and its quality indicators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .mesh import FemSpace, weighted_mass
from .spectral import ModeSet, multiplicity_tolerance


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    """Skew-symmetric matrix driving the modes: d(psi_m)/dt = sum_p M[m, p] psi_p."""

    entries: np.ndarray
    chi: float
    time_label: float = 0.0

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def leading(self, n: int) -> "PropagatorMatrix":
        """Leading ``n x n`` principal submatrix."""
        return PropagatorMatrix(self.entries[:n, :n].copy(), self.chi, self.time_label)


def bracket_matrix(fem: FemSpace, modes: ModeSet, f_of_u) -> np.ndarray:
    """Matrix of <F psi_m, psi_p> over all mode pairs."""
    psi = modes.modes
    return psi.T @ (weighted_mass(fem, f_of_u) @ psi)


def propagator_from_bracket(bracket, eigenvalues, chi: float, time_label: float = 0.0) -> PropagatorMatrix:
    """chi * B[m, p] / (lambda_p - lambda_m), zero for (near-)equal eigenvalues.

    Only the strict upper triangle is computed; the lower one is its negative,
    so the result is skew-symmetric bit for bit.
    """
    b = np.asarray(bracket, dtype=float)
    lam = np.asarray(eigenvalues, dtype=float)
    n = lam.size
    if b.shape != (n, n):
        raise ValueError(f"bracket shape {b.shape} does not match {n} eigenvalues")
    gap = lam[None, :] - lam[:, None]
    upper = np.triu(np.ones((n, n), dtype=bool), 1) & (np.abs(gap) > multiplicity_tolerance(lam))
    m = np.zeros((n, n))
    m[upper] = chi * b[upper] / gap[upper]
    return PropagatorMatrix(m - m.T, float(chi), float(time_label))


def assemble_propagator(fem: FemSpace, modes: ModeSet, f_of_u, time_label: float = 0.0) -> PropagatorMatrix:
    return propagator_from_bracket(bracket_matrix(fem, modes, f_of_u), modes.eigenvalues, modes.chi, time_label)


def mode_energy(m: PropagatorMatrix, index: int) -> float:
    """Squared norm of row ``index`` of the propagator."""
    if not 0 <= index < m.size:
        raise IndexError(f"mode index {index} outside [0, {m.size})")
    row = m.entries[index]
    return float(row @ row)


def frobenius_norm(m: PropagatorMatrix) -> float:
    return float(np.linalg.norm(m.entries, "fro"))


def frobenius_gap(m: PropagatorMatrix, n_small: int) -> float:
    """Relative drop of the Frobenius norm when truncating to ``n_small`` modes."""
    if not 1 <= n_small <= m.size:
        raise ConfigError(f"n_small={n_small} outside [1, {m.size}]")
    full = frobenius_norm(m)
    if full == 0.0:
        raise NumericalError("reference propagator has zero Frobenius norm")
    return (full - frobenius_norm(m.leading(n_small))) / full


def frobenius_error(fem: FemSpace, modes_full: ModeSet, f_of_u, n_small: int) -> float:
    """Frobenius indicator of a truncation to ``n_small`` modes against all of ``modes_full``."""
    return frobenius_gap(assemble_propagator(fem, modes_full, f_of_u), n_small)


def kdv_exact_lax_projection(fem: FemSpace, modes: ModeSet, u) -> np.ndarray:
    """Project the closed-form KdV mode generator onto the mode basis.

    Each mode moves as ``-(4 psi''' + 6 u psi' + 3 u' psi)`` under the KdV flow
    for the operator ``-d2/dx2 - u``; entry ``[m, p]`` is the mass inner product
    of that velocity for mode ``m`` with mode ``p``. Derivatives use the same
    finite-difference stencils as the KdV right-hand side. Only meaningful for
    ``chi == 1`` on a uniform 1D mesh.
    """
    from .problems import fd_first_derivative, fd_third_derivative, uniform_spacing

    if modes.chi != 1.0:
        raise ConfigError("the closed-form KdV generator assumes chi == 1")
    h = uniform_spacing(fem.mesh)
    u = fem.check_field(u, "u")
    psi = modes.modes
    ux = fd_first_derivative(u, h)
    vel = -(4.0 * fd_third_derivative(psi, h) + 6.0 * u[:, None] * fd_first_derivative(psi, h)
            + 3.0 * ux[:, None] * psi)
    return vel.T @ (fem.mass @ psi)
