"""Schrödinger spectrum of a signal and its semi-classical reconstruction.

The discrete operator is ``K - chi * W(u)`` against the mass matrix ``M``,
where ``W(u)`` is the mass matrix weighted by the (nonnegative) signal.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import CalibrationError, ConfigError, EigensolverError
from .mesh import FemSpace, l2_norm, weighted_mass

log = logging.getLogger(__name__)

# Eigenvalues closer than this (relative to max(1, |lambda|max)) count as equal.
MULTIPLICITY_RTOL = 1e-10
# Eigenvalues in (-NEGATIVE_CUTOFF, 0) count as nonnegative.
NEGATIVE_CUTOFF = 1e-12
# u = DT_FACTOR / chi * sum(kappa * phi**2) for a reflectionless 1D potential
# of the operator -d2/dx2 - chi * u.
DT_FACTOR = 4.0

RESIDUAL_RTOL = 1e-6
GRAM_ATOL = 1e-8


def multiplicity_tolerance(eigenvalues) -> float:
    lam = np.asarray(eigenvalues, dtype=float)
    scale = np.abs(lam).max() if lam.size else 0.0
    return MULTIPLICITY_RTOL * max(1.0, float(scale))


def count_negative(eigenvalues) -> int:
    return int(np.count_nonzero(np.asarray(eigenvalues) <= -NEGATIVE_CUTOFF))


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Eigenpairs of the discrete Schrödinger operator.

    ``modes`` holds one mass-orthonormal mode per column at full nodal length
    (zero on Dirichlet nodes). The first ``n_negative`` columns are the modes
    used for reconstruction; the rest only enter the propagator.
    """

    chi: float
    eigenvalues: np.ndarray
    modes: np.ndarray
    n_negative: int
    shift: float = 0.0

    @property
    def n_total(self) -> int:
        return self.modes.shape[1]

    @property
    def kappa(self) -> np.ndarray:
        """sqrt(-lambda) of the reconstruction modes."""
        return np.sqrt(np.maximum(-self.eigenvalues[: self.n_negative], 0.0))

    @property
    def negative_modes(self) -> np.ndarray:
        return self.modes[:, : self.n_negative]

    def with_updates(self, **changes) -> "ModeSet":
        return replace(self, **changes)


def fix_signs(modes: np.ndarray) -> np.ndarray:
    """Flip columns so the entry of largest magnitude in each is positive."""
    modes = np.array(modes, dtype=float, copy=True)
    if modes.size == 0:
        return modes
    rows = np.argmax(np.abs(modes), axis=0)
    signs = np.sign(modes[rows, np.arange(modes.shape[1])])
    signs[signs == 0] = 1.0
    return modes * signs


def gram_matrix(fem: FemSpace, modes) -> np.ndarray:
    modes = np.asarray(modes)
    return modes.T @ (fem.mass @ modes)


def gram_deviation(fem: FemSpace, modes) -> float:
    g = gram_matrix(fem, modes)
    if g.size == 0:
        return 0.0
    return float(np.abs(g - np.eye(g.shape[0])).max())


def schrodinger_operator(fem: FemSpace, u, chi: float):
    """Sparse matrix of ``K - chi W(u)`` (unconstrained)."""
    return (fem.stiffness - chi * weighted_mass(fem, u)).tocsr()


def solve_schrodinger_spectrum(fem: FemSpace, u, chi: float, n_modes: int, shift: float = 0.0) -> ModeSet:
    """Lowest ``n_modes`` eigenpairs of ``(K - chi W(u)) v = lambda M v``.

    ``u`` should already be nonnegative (see :func:`shift_nonnegative`);
    ``shift`` is only recorded so reconstructions can undo it.
    """
    u = fem.check_field(u, "u")
    if not chi > 0 or not np.isfinite(chi):
        raise ConfigError(f"chi must be positive, got {chi}")
    n_modes = int(n_modes)
    if not 1 <= n_modes <= fem.n_free:
        raise ConfigError(f"n_modes={n_modes} outside [1, {fem.n_free}]")
    op = schrodinger_operator(fem, u, chi)
    a = fem.constrained(op).toarray()
    b = fem.constrained(fem.mass).toarray()
    try:
        lam, vec = sla.eigh(a, b, subset_by_index=[0, n_modes - 1])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"generalized eigensolve failed: {exc}") from exc

    resid = a @ vec - (b @ vec) * lam
    scale = np.linalg.norm(a, 1) + np.abs(lam) * np.linalg.norm(b, 1)
    rel = np.linalg.norm(resid, axis=0) / (scale * np.linalg.norm(vec, axis=0))
    if np.any(~np.isfinite(rel)) or rel.max() > RESIDUAL_RTOL:
        raise EigensolverError(f"eigen-residual {rel.max():.2e} exceeds {RESIDUAL_RTOL}")

    modes = fix_signs(fem.expand(vec))
    dev = gram_deviation(fem, modes)
    if dev > GRAM_ATOL:
        raise EigensolverError(f"eigenvectors not orthonormal (deviation {dev:.2e})")
    return ModeSet(float(chi), lam, modes, count_negative(lam), float(shift))


def scsa_reconstruct(modes: ModeSet) -> np.ndarray:
    """Semi-classical sum ``4/chi * sum(kappa_m * phi_m**2) + shift``."""
    phi = modes.negative_modes
    u = DT_FACTOR / modes.chi * (phi**2 @ modes.kappa)
    return u + modes.shift


def shift_nonnegative(u) -> tuple[np.ndarray, float]:
    """Return ``u - s`` with ``s = min(0, min u)`` together with ``s``."""
    u = np.asarray(u, dtype=float)
    s = min(0.0, float(u.min())) if u.size else 0.0
    return u - s, s


def _spectrum_covering_negatives(fem, u, chi, n_modes, shift):
    """Solve with enough modes that at least one is nonnegative."""
    n = min(n_modes, fem.n_free)
    while True:
        ms = solve_schrodinger_spectrum(fem, u, chi, n, shift)
        if ms.n_negative < n or n == fem.n_free:
            return ms
        n = min(2 * n, fem.n_free)


def scsa_error(fem: FemSpace, u0, modes: ModeSet) -> float:
    """Absolute L2 error of the semi-classical reconstruction of ``u0``."""
    return l2_norm(fem, np.asarray(u0) - scsa_reconstruct(modes))


def calibrate_chi(fem: FemSpace, u0, epsilon0: float, chi_initial: float, chi_max: float,
                  n_modes: int = 10, bisection_steps: int = 8) -> tuple[float, ModeSet]:
    """Find a chi whose semi-classical reconstruction of ``u0`` meets ``epsilon0``.

    Doubles ``chi_initial`` until the L2 error drops below ``epsilon0`` and then
    bisects between the last failing and first passing value, keeping the
    smallest passing chi. The returned mode set holds at least ``n_modes``
    modes and every negative eigenvalue.
    """
    if not epsilon0 > 0:
        raise ConfigError("epsilon0 must be positive")
    if not 0 < chi_initial <= chi_max:
        raise ConfigError("need 0 < chi_initial <= chi_max")
    u, s = shift_nonnegative(fem.check_field(u0, "u0"))

    def trial(chi):
        ms = _spectrum_covering_negatives(fem, u, chi, n_modes, s)
        err = scsa_error(fem, u0, ms)
        log.debug("calibrate: chi=%g n_negative=%d error=%.3e", chi, ms.n_negative, err)
        return ms, err

    best = (None, np.inf)
    chi_lo, chi = None, float(chi_initial)
    while chi <= chi_max:
        ms, err = trial(chi)
        if err < best[1]:
            best = (chi, err)
        if err <= epsilon0:
            break
        chi_lo, chi = chi, 2.0 * chi
    else:
        raise CalibrationError(
            f"no chi <= {chi_max} reaches error {epsilon0:g} (best {best[1]:.3e} at chi={best[0]})",
            best_chi=best[0], best_error=best[1])

    if chi_lo is not None:
        lo, hi, hi_set = chi_lo, chi, ms
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            mid_set, mid_err = trial(mid)
            if mid_err <= epsilon0:
                hi, hi_set = mid, mid_set
            else:
                lo = mid
        chi, ms = hi, hi_set
    return chi, ms
