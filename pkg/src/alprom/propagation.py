"""One explicit time step for eigenvalues and modes."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, RankDeficiencyError
from .lax import PropagatorMatrix, bracket_matrix
from .mesh import FemSpace
from .spectral import ModeSet, gram_deviation

log = logging.getLogger(__name__)

CHI_SCALED = "scaled"
CHI_FREE = "unscaled"
EIGENVALUE_VARIANTS = (CHI_SCALED, CHI_FREE)


@dataclass(frozen=True)
class StepReport:
    gram_deviation: float
    eigenvalue_increments: np.ndarray = field(default_factory=lambda: np.zeros(0))
    promoted_modes: tuple = ()


def _check_dt(dt):
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigError(f"dt must be positive, got {dt}")


def eigenvalue_rate_factor(chi: float, variant: str = CHI_SCALED) -> float:
    """Factor in front of <F psi, psi> in the eigenvalue law for a given variant."""
    if variant == CHI_SCALED:
        return chi
    if variant == CHI_FREE:
        return 1.0
    raise ConfigError(f"unknown eigenvalue variant {variant!r}; expected one of {EIGENVALUE_VARIANTS}")


def step_eigenvalues(fem: FemSpace, modes: ModeSet, f_of_u, dt: float, variant: str = CHI_SCALED,
                     bracket=None) -> np.ndarray:
    """Explicit Euler step ``lambda - dt * c * <F psi_m, psi_m>``.

    ``c`` is chi for the ``scaled`` variant and 1 for ``unscaled``.
    A precomputed bracket matrix can be passed to avoid reassembly.
    """
    _check_dt(dt)
    factor = eigenvalue_rate_factor(modes.chi, variant)
    if bracket is None:
        bracket = bracket_matrix(fem, modes, f_of_u)
    return modes.eigenvalues - dt * factor * np.diag(bracket)


def taylor_factor(m: PropagatorMatrix, dt: float) -> np.ndarray:
    """Second-order truncation ``I + dt M + dt^2 M^2 / 2`` of ``exp(dt M)``."""
    a = dt * m.entries
    return np.eye(m.size) + a + 0.5 * (a @ a)


def _apply_factor(modes: ModeSet, factor: np.ndarray) -> ModeSet:
    if factor.shape != (modes.n_total, modes.n_total):
        raise ValueError(f"propagator size {factor.shape[0]} does not match {modes.n_total} modes")
    return modes.with_updates(modes=modes.modes @ factor.T)


def step_modes(fem: FemSpace, modes: ModeSet, m: PropagatorMatrix, dt: float) -> tuple[ModeSet, StepReport]:
    """Advance modes with the truncated exponential; report the Gram deviation."""
    _check_dt(dt)
    new = _apply_factor(modes, taylor_factor(m, dt))
    return new, StepReport(gram_deviation(fem, new.modes), np.zeros(new.n_total))


def exact_exponential_step(modes: ModeSet, m: PropagatorMatrix, dt: float) -> ModeSet:
    """Advance modes with ``exp(dt M)`` (scaling and squaring with Padé)."""
    _check_dt(dt)
    return _apply_factor(modes, sla.expm(dt * m.entries))


def reorthonormalize(fem: FemSpace, modes: ModeSet, rank_tol: float = 1e-10) -> ModeSet:
    """Modified Gram-Schmidt in the mass inner product, applied twice.

    Raises :class:`RankDeficiencyError` if a mode loses all but ``rank_tol`` of
    its norm to the preceding ones.
    """
    q = np.array(modes.modes, dtype=float, copy=True)
    for _ in range(2):
        for j in range(q.shape[1]):
            v = q[:, j]
            norm0 = np.sqrt(v @ (fem.mass @ v))
            for i in range(j):
                v -= (q[:, i] @ (fem.mass @ v)) * q[:, i]
            norm = np.sqrt(max(v @ (fem.mass @ v), 0.0))
            if norm0 == 0.0 or norm <= rank_tol * norm0:
                raise RankDeficiencyError(f"mode {j} is numerically dependent on the previous modes")
            q[:, j] = v / norm
    return modes.with_updates(modes=q)
