"""The reduced-order time loop, its bookkeeping and error metrics."""

from __future__ import annotations

import logging
import time as _time
from dataclasses import dataclass, field, replace

import numpy as np

from .config import AlpConfig
from .errors import ConfigError, NumericalError
from .lax import PropagatorMatrix, bracket_matrix, frobenius_gap, frobenius_norm, propagator_from_bracket
from .mesh import FemSpace, assemble, l2_norm
from .problems import FKPP, ProblemSpec, fkpp_reference_solve
from .propagation import (StepReport, eigenvalue_rate_factor, exact_exponential_step, reorthonormalize,
                          step_modes)
from .reconstruction import reconstruct_solution, solve_alpha
from .spectral import (ModeSet, NEGATIVE_CUTOFF, calibrate_chi, gram_deviation, scsa_reconstruct,
                       shift_nonnegative, solve_schrodinger_spectrum)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AlpState:
    """Everything the loop carries from one step to the next."""

    fem: FemSpace
    problem: ProblemSpec
    modes: ModeSet
    alpha: np.ndarray
    u: np.ndarray
    time: float = 0.0
    step: int = 0
    initial_error: float = float("nan")
    initial_error_abs: float = float("nan")
    last_report: StepReport | None = None
    last_propagator: PropagatorMatrix | None = None

    @property
    def shift(self) -> float:
        return self.modes.shift


@dataclass
class PromotionEvent:
    step: int
    time: float
    mode_index: int
    eigenvalue: float

    def as_dict(self):
        return {"step": self.step, "time": self.time, "mode_index": self.mode_index,
                "eigenvalue": self.eigenvalue}


@dataclass
class AlpTrajectory:
    """Per-step series of one run; row ``n`` describes time ``n * dt``.

    ``frobenius`` and ``frobenius_gap`` at row ``n`` come from the propagator
    built from ``u^n``.
    """

    times: np.ndarray
    n_negative: np.ndarray
    eigenvalues: np.ndarray
    frobenius: np.ndarray
    gram_deviation: np.ndarray
    alpha: list
    snapshots: dict
    promotions: list
    l2_error: np.ndarray | None = None
    peak_error: np.ndarray | None = None
    frobenius_gap: np.ndarray | None = None
    chi: float = float("nan")
    initial_error: float = float("nan")
    initial_error_abs: float = float("nan")
    wall_time: float = 0.0
    final_u: np.ndarray | None = None
    fem: FemSpace | None = field(default=None, repr=False)

    @property
    def n_rows(self) -> int:
        return len(self.times)


def metric_l2_relative_error(fem: FemSpace, u, u_ref) -> float:
    ref = l2_norm(fem, u_ref)
    if ref == 0.0:
        raise NumericalError("reference field has zero L2 norm")
    return l2_norm(fem, np.asarray(u) - np.asarray(u_ref)) / ref


def peak_position(x, u, margin: float = 1e-12) -> float:
    """Location of the nodal maximum, refined by the parabola through its neighbours."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    i = int(np.argmax(u))
    far = np.ones(len(u), dtype=bool)
    far[max(i - 1, 0):i + 2] = False
    if len(u) < 3 or (far.any() and u[i] - u[far].max() <= margin) or np.ptp(u) <= margin:
        raise NumericalError("field has no unique maximum")
    if i == 0 or i == len(u) - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1:i + 2]
    y0, y1, y2 = u[i - 1:i + 2]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    if a >= 0:
        return float(x1)
    return float(np.clip(-b / (2 * a), x0, x2))


def metric_peak_position_error(x, u, u_exact, travel_distance: float) -> float:
    """Distance between the two peaks divided by the distance the exact peak travelled."""
    if not travel_distance > 0:
        raise ConfigError("travel_distance must be positive")
    return abs(peak_position(x, u) - peak_position(x, u_exact)) / travel_distance


def _initial_reconstruction_kind(config: AlpConfig, dim: int) -> str:
    if config.initial_reconstruction != "auto":
        return config.initial_reconstruction
    return "scsa" if dim == 1 else "alpha"


def alp_initialize(config: AlpConfig, fem: FemSpace | None = None, u0=None) -> AlpState:
    """Decompose the initial datum and reconstruct it.

    Returns a state whose ``modes`` carry chi and the nonnegativity shift and
    whose ``initial_error`` is the relative L2 error of the reconstruction.
    """
    if fem is None:
        fem = assemble(config.mesh.build())
    if u0 is None:
        u0 = config.initial.evaluate(fem, config.problem)
    u0 = fem.check_field(u0, "u0")
    n_modes = config.n_modes_M
    if n_modes > fem.n_free:
        raise ConfigError(f"n_modes={n_modes} exceeds the {fem.n_free} free degrees of freedom")
    u_pos, shift = shift_nonnegative(u0)
    if config.chi is None:
        chi, modes = calibrate_chi(fem, u0, config.epsilon0, config.chi_initial, config.chi_max, n_modes)
        if modes.n_total != n_modes:
            modes = solve_schrodinger_spectrum(fem, u_pos, chi, n_modes, shift)
        log.info("calibrated chi=%g with %d negative modes", chi, modes.n_negative)
    else:
        modes = solve_schrodinger_spectrum(fem, u_pos, config.chi, n_modes, shift)
    if modes.n_negative == 0:
        raise NumericalError("no negative eigenvalue: nothing to reconstruct (increase chi)")
    if modes.n_negative == n_modes:
        log.warning("all %d modes are negative; the propagator has no positive modes", n_modes)

    if _initial_reconstruction_kind(config, fem.mesh.dimension) == "scsa":
        u = scsa_reconstruct(modes)
        alpha = modes.kappa * (4.0 / modes.chi)
    else:
        alpha = solve_alpha(fem, modes).alpha
        u = reconstruct_solution(modes, alpha)
    err_abs = l2_norm(fem, u - u0)
    ref = l2_norm(fem, u0)
    return AlpState(fem, config.problem, modes, alpha, u, 0.0, 0, err_abs / ref if ref else float("nan"),
                    err_abs)


def alp_step(state: AlpState, dt: float, variant: str = "scaled", mode_step: str = "taylor",
             promotion: bool = True, reorthonormalize_threshold: float | None = None) -> AlpState:
    """Advance one step: propagator, eigenvalues, modes, promotion, coefficients, solution."""
    fem, modes = state.fem, state.modes
    f = state.problem.rhs(fem, state.u)
    bracket = bracket_matrix(fem, modes, f)
    prop = propagator_from_bracket(bracket, modes.eigenvalues, modes.chi, state.time)

    increments = -dt * eigenvalue_rate_factor(modes.chi, variant) * np.diag(bracket)
    lam = modes.eigenvalues + increments
    if mode_step == "exact":
        moved = exact_exponential_step(modes, prop, dt)
        dev = gram_deviation(fem, moved.modes)
    else:
        moved, report = step_modes(fem, modes, prop, dt)
        dev = report.gram_deviation
    if reorthonormalize_threshold is not None and dev > reorthonormalize_threshold:
        log.info("step %d: Gram deviation %.2e above %.1e, reorthonormalizing",
                 state.step + 1, dev, reorthonormalize_threshold)
        moved = reorthonormalize(fem, moved)
        dev = gram_deviation(fem, moved.modes)

    n_neg = modes.n_negative
    promoted = []
    if promotion:
        while n_neg < len(lam) and lam[n_neg] <= -NEGATIVE_CUTOFF:
            promoted.append(n_neg)
            n_neg += 1
    new_modes = moved.with_updates(eigenvalues=lam, n_negative=n_neg)
    coeffs = solve_alpha(fem, new_modes)
    u = reconstruct_solution(new_modes, coeffs.alpha)
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"reconstruction became non-finite at step {state.step + 1}")
    report = StepReport(dev, increments, tuple(promoted))
    return replace(state, modes=new_modes, alpha=coeffs.alpha, u=u, time=(state.step + 1) * dt,
                   step=state.step + 1, last_report=report, last_propagator=prop)


def reference_series(config: AlpConfig, fem: FemSpace, u0) -> callable:
    """Callable ``ref(step) -> field`` for the exact or full-order solution, or ``None``."""
    x = fem.mesh.x
    if config.problem.kind == FKPP:
        ref_dt = config.reference_dt or config.dt
        ratio = config.dt / ref_dt
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("dt must be an integer multiple of reference_dt")
        ratio = int(round(ratio))
        traj = fkpp_reference_solve(fem, u0, config.problem.alpha, ref_dt, ratio * config.n_steps)
        return lambda n: traj[n * ratio]
    if config.initial.exact(x[:1], 0.0) is None:
        return None
    return lambda n: config.initial.exact(x, n * config.dt)


def _propagator_stats(config, state):
    f = state.problem.rhs(state.fem, state.u)
    prop = propagator_from_bracket(bracket_matrix(state.fem, state.modes, f), state.modes.eigenvalues,
                                   state.modes.chi, state.time)
    return prop


def run_alp(config: AlpConfig, progress=None) -> AlpTrajectory:
    """Run the full loop described by ``config``; ``progress(step, state)`` is called per step."""
    t_start = _time.perf_counter()
    fem = assemble(config.mesh.build())
    u0 = config.initial.evaluate(fem, config.problem)
    state = alp_initialize(config, fem, u0)
    n_steps = config.n_steps
    rows = n_steps + 1
    nm = state.modes.n_total
    stride = config.snapshot_stride or (1 if fem.mesh.dimension == 1 else 5)

    times = np.arange(rows) * config.dt
    n_neg = np.zeros(rows, dtype=int)
    eigs = np.zeros((rows, nm))
    frob = np.zeros(rows)
    gram = np.zeros(rows)
    gap = np.full(rows, np.nan) if config.frobenius_truncation else None
    alphas, snaps, events = [], {}, []

    ref = reference_series(config, fem, u0) if config.track_errors else None
    l2 = np.zeros(rows) if ref is not None else None
    peak = None
    travel = config.initial.beta * config.t_final
    if ref is not None and config.initial.kind == "one_soliton" and fem.mesh.dimension == 1:
        peak = np.zeros(rows)

    def record(n, st, prop):
        n_neg[n] = st.modes.n_negative
        eigs[n] = st.modes.eigenvalues
        frob[n] = frobenius_norm(prop)
        if gap is not None:
            gap[n] = frobenius_gap(prop, config.frobenius_truncation)
        gram[n] = gram_deviation(fem, st.modes.modes) if st.last_report is None else st.last_report.gram_deviation
        alphas.append(np.array(st.alpha))
        if n % stride == 0 or n == n_steps:
            snaps[n] = st.u.copy()
        if ref is not None:
            r = ref(n)
            l2[n] = metric_l2_relative_error(fem, st.u, r)
            if peak is not None:
                peak[n] = metric_peak_position_error(fem.mesh.x, st.u, r, travel)

    thresh = config.reorthonormalize_threshold if config.reorthonormalize else None
    pending = state
    for n in range(n_steps):
        new = alp_step(pending, config.dt, config.eigenvalue_chi_variant, config.mode_step,
                       config.promotion, thresh)
        record(n, pending, new.last_propagator)
        for idx in new.last_report.promoted_modes:
            ev = PromotionEvent(new.step, new.time, idx, float(new.modes.eigenvalues[idx]))
            events.append(ev)
            log.info("promoted mode %d at step %d (t=%g)", idx, ev.step, ev.time)
        pending = new
        if progress is not None:
            progress(new.step, new)
    record(n_steps, pending, _propagator_stats(config, pending))

    return AlpTrajectory(times=times, n_negative=n_neg, eigenvalues=eigs, frobenius=frob,
                         gram_deviation=gram, alpha=alphas, snapshots=snaps, promotions=events,
                         l2_error=l2, peak_error=peak, frobenius_gap=gap, chi=state.modes.chi,
                         initial_error=state.initial_error, initial_error_abs=state.initial_error_abs,
                         wall_time=_time.perf_counter() - t_start, final_u=pending.u.copy(), fem=fem)


def spectrum_summary(config: AlpConfig) -> dict:
    """Decomposition of the initial datum only: eigenvalues and reconstruction errors."""
    state = alp_initialize(config)
    return {
        "chi": state.modes.chi,
        "n_negative": state.modes.n_negative,
        "n_modes": state.modes.n_total,
        "eigenvalues": state.modes.eigenvalues.tolist(),
        "shift": state.shift,
        "reconstruction_error_abs": state.initial_error_abs,
        "reconstruction_error_rel": state.initial_error,
    }
