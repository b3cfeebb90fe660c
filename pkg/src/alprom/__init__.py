"""Reduced-order evolution of nonlinear PDEs on Schrodinger eigenmodes.

A solution is decomposed on eigenfunctions of a Schrödinger operator whose
potential is the solution itself. Eigenvalues and modes are advanced with a
reduced propagator, and the solution is rebuilt from them at every step.
"""

from .config import AlpConfig, load_config, parse_config
from .driver import (AlpState, AlpTrajectory, alp_initialize, alp_step, metric_l2_relative_error,
                     metric_peak_position_error, run_alp)
from .errors import (AlpError, CalibrationError, ConfigError, EigensolverError, IllConditionedError,
                     MeshError, NumericalError, RankDeficiencyError)
from .lax import (PropagatorMatrix, assemble_propagator, frobenius_error, frobenius_norm,
                  kdv_exact_lax_projection, mode_energy)
from .mesh import (FemSpace, Mesh, assemble, build_interval_mesh, build_rect_union_mesh,
                   build_structured_rect_mesh, l2_inner, l2_norm, load_triangle_mesh, weighted_mass)
from .problems import (ProblemSpec, SolitonData, exact_one_soliton, exact_three_soliton, fkpp_reference_solve,
                       fkpp_rhs, kdv_rhs)
from .propagation import StepReport, exact_exponential_step, reorthonormalize, step_eigenvalues, step_modes
from .reconstruction import ReconstructionCoefficients, reconstruct_solution, solve_alpha
from .spectral import ModeSet, calibrate_chi, scsa_reconstruct, shift_nonnegative, solve_schrodinger_spectrum

__version__ = "0.1.0"

__all__ = [
    "AlpConfig",
    "AlpError",
    "AlpState",
    "AlpTrajectory",
    "CalibrationError",
    "ConfigError",
    "EigensolverError",
    "FemSpace",
    "IllConditionedError",
    "Mesh",
    "MeshError",
    "ModeSet",
    "NumericalError",
    "ProblemSpec",
    "PropagatorMatrix",
    "RankDeficiencyError",
    "ReconstructionCoefficients",
    "SolitonData",
    "StepReport",
    "alp_initialize",
    "alp_step",
    "assemble",
    "assemble_propagator",
    "build_interval_mesh",
    "build_rect_union_mesh",
    "build_structured_rect_mesh",
    "calibrate_chi",
    "exact_exponential_step",
    "exact_one_soliton",
    "exact_three_soliton",
    "fkpp_reference_solve",
    "fkpp_rhs",
    "frobenius_error",
    "frobenius_norm",
    "kdv_exact_lax_projection",
    "kdv_rhs",
    "l2_inner",
    "l2_norm",
    "load_config",
    "load_triangle_mesh",
    "metric_l2_relative_error",
    "metric_peak_position_error",
    "mode_energy",
    "parse_config",
    "reconstruct_solution",
    "reorthonormalize",
    "run_alp",
    "scsa_reconstruct",
    "shift_nonnegative",
    "solve_alpha",
    "solve_schrodinger_spectrum",
    "step_eigenvalues",
    "step_modes",
    "weighted_mass",
]
