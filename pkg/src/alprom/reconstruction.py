"""Recover the solution from the current modes and eigenvalues.

The solution is sought as ``sum_k alpha_k phi_k**2`` over the reconstruction
modes. Testing the eigen-equation of each mode against itself gives a small
symmetric system ``G alpha = r`` with ``G[m, k] = <phi_k**2, phi_m**2>`` and
``r_m = -(lambda_m - <grad phi_m, grad phi_m>) / chi``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import IllConditionedError
from .mesh import FemSpace
from .spectral import ModeSet

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ReconstructionCoefficients:
    alpha: np.ndarray
    condition_estimate: float


def squares_gram(fem: FemSpace, modes: ModeSet) -> np.ndarray:
    sq = modes.negative_modes**2
    return sq.T @ (fem.mass @ sq)


def alpha_rhs(fem: FemSpace, modes: ModeSet) -> np.ndarray:
    phi = modes.negative_modes
    grad_energy = np.einsum("im,im->m", phi, fem.stiffness @ phi)
    return -(modes.eigenvalues[: modes.n_negative] - grad_energy) / modes.chi


def solve_alpha(fem: FemSpace, modes: ModeSet, condition_limit: float = CONDITION_LIMIT) -> ReconstructionCoefficients:
    n = modes.n_negative
    if n == 0:
        return ReconstructionCoefficients(np.zeros(0), 1.0)
    g = squares_gram(fem, modes)
    g = 0.5 * (g + g.T)
    rhs = alpha_rhs(fem, modes)
    cond = float(np.linalg.cond(g))
    if not np.isfinite(cond) or cond > condition_limit:
        raise IllConditionedError(
            f"squared-mode Gram matrix has condition {cond:.3e} > {condition_limit:.1e} (n_negative={n})",
            condition=cond)
    try:
        alpha = sla.solve(g, rhs, assume_a="pos")
    except np.linalg.LinAlgError:
        alpha = sla.solve(g, rhs, assume_a="sym")
    return ReconstructionCoefficients(alpha, cond)


def reconstruct_solution(modes: ModeSet, alpha) -> np.ndarray:
    """Nodal field ``sum_p alpha_p phi_p**2`` plus the stored shift."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (modes.n_negative,):
        raise ValueError(f"alpha has shape {alpha.shape}, expected ({modes.n_negative},)")
    return modes.negative_modes**2 @ alpha + modes.shift
