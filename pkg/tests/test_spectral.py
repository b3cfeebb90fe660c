import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from alprom.errors import CalibrationError, ConfigError
from alprom.mesh import NEUMANN, assemble, build_interval_mesh, weighted_mass
from alprom.problems import exact_three_soliton, fkpp1d_initial
from alprom.spectral import (calibrate_chi, count_negative, fix_signs, gram_deviation, multiplicity_tolerance,
                             scsa_error, scsa_reconstruct, shift_nonnegative, solve_schrodinger_spectrum)


@pytest.fixture(scope="module")
def fkpp_fem():
    return assemble(build_interval_mesh(0, 1, 250))


@pytest.fixture(scope="module")
def fkpp_u0(fkpp_fem):
    u = fkpp1d_initial(fkpp_fem.mesh.x)
    u[fkpp_fem.mesh.boundary_nodes] = 0.0
    return u


def fd_dirichlet_spectrum(x, u, chi, count):
    """Oracle: -psi'' - chi u psi on the interior of a uniform grid, 3-point Laplacian."""
    h = x[1] - x[0]
    diag = 2.0 / h**2 - chi * u[1:-1]
    off = -np.ones(len(x) - 3) / h**2
    return sla.eigh_tridiagonal(diag, off, select="i", select_range=(0, count - 1), eigvals_only=True)


def test_laplacian_spectrum():
    fem = assemble(build_interval_mesh(0, 1, 400))
    ms = solve_schrodinger_spectrum(fem, np.zeros(fem.n_nodes), 1.0, 3)
    np.testing.assert_allclose(ms.eigenvalues, (np.arange(1, 4) * np.pi) ** 2, rtol=0.01)
    assert ms.n_negative == 0


def test_one_soliton_single_bound_state(soliton_modes):
    assert soliton_modes.n_negative == 1
    assert soliton_modes.eigenvalues[0] == pytest.approx(-1.0, abs=5e-3)


def test_three_soliton_bound_states(soliton_fem):
    x = soliton_fem.mesh.x
    ms = solve_schrodinger_spectrum(soliton_fem, exact_three_soliton(x, 0.0), 1.0, 6)
    assert ms.n_negative == 3
    xf = np.linspace(-15, 15, 4001)
    oracle = fd_dirichlet_spectrum(xf, exact_three_soliton(xf, 0.0), 1.0, 3)
    np.testing.assert_allclose(oracle, [-3.0625, -2.25, -1.0], rtol=5e-3)
    np.testing.assert_allclose(ms.eigenvalues[:3], oracle, rtol=0.05)


def test_mode_set_invariants(soliton_fem, soliton_modes):
    assert gram_deviation(soliton_fem, soliton_modes.modes) <= 1e-8
    assert np.all(np.diff(soliton_modes.eigenvalues) > 0)
    assert np.all(soliton_modes.modes[soliton_fem.mesh.boundary_nodes] == 0)
    a = (soliton_fem.stiffness - weighted_mass(soliton_fem, 2 / np.cosh(soliton_fem.mesh.x) ** 2)).toarray()
    for lam, v in zip(soliton_modes.eigenvalues, soliton_modes.modes.T):
        r = (a @ v - lam * (soliton_fem.mass @ v))[soliton_fem.free]
        assert np.linalg.norm(r) <= 1e-6 * np.linalg.norm(a, 1) * np.linalg.norm(v)


def test_sign_convention(soliton_modes):
    psi = soliton_modes.modes
    idx = np.argmax(np.abs(psi), axis=0)
    assert np.all(psi[idx, np.arange(psi.shape[1])] > 0)
    np.testing.assert_array_equal(fix_signs(-psi), psi)


def test_spectrum_preconditions(soliton_fem, soliton_u0):
    with pytest.raises(ConfigError):
        solve_schrodinger_spectrum(soliton_fem, soliton_u0, 0.0, 3)
    with pytest.raises(ConfigError):
        solve_schrodinger_spectrum(soliton_fem, soliton_u0, 1.0, soliton_fem.n_free + 1)


def test_negative_threshold_and_multiplicity():
    assert count_negative([-1.0, -1e-13, 0.0, 2.0]) == 1
    assert multiplicity_tolerance([0.5]) == 1e-10
    assert multiplicity_tolerance([-300.0, 2.0]) == pytest.approx(3e-8)


def test_scsa_zero_negatives_gives_zero():
    fem = assemble(build_interval_mesh(0, 1, 50))
    ms = solve_schrodinger_spectrum(fem, np.zeros(51), 1.0, 3)
    np.testing.assert_array_equal(scsa_reconstruct(ms), np.zeros(51))


def test_scsa_one_soliton(soliton_fem, soliton_u0, soliton_modes):
    assert scsa_error(soliton_fem, soliton_u0, soliton_modes) <= 1e-3


def test_scsa_fkpp_uses_four_modes(fkpp_fem, fkpp_u0):
    assert solve_schrodinger_spectrum(fkpp_fem, fkpp_u0, 500.0, 10).n_negative == 4


def test_shift_nonnegative():
    u = np.array([0.0, 1.0, 2.0])
    v, s = shift_nonnegative(u)
    assert s == 0.0 and np.array_equal(v, u)
    v, s = shift_nonnegative(np.full(4, -2.0))
    assert s == -2.0 and np.array_equal(v, np.zeros(4))
    v, s = shift_nonnegative(np.array([-1.5, 3.0, 0.25]))
    assert v.min() == 0.0 and s == -1.5


def test_scsa_undoes_shift(soliton_fem, soliton_u0):
    shifted = soliton_u0 - 0.5
    v, s = shift_nonnegative(shifted)
    ms = solve_schrodinger_spectrum(soliton_fem, v, 1.0, 5, s)
    assert ms.shift == pytest.approx(-0.5, abs=1e-9)
    assert np.mean(scsa_reconstruct(ms)) < 0


def test_calibrate_accepts_initial(soliton_fem, soliton_u0):
    chi, ms = calibrate_chi(soliton_fem, soliton_u0, 1e-3, 1.0, 64.0)
    assert chi == 1.0 and ms.n_negative == 1


def test_calibrate_bisects_between_doublings(fkpp_fem, fkpp_u0):
    # The error first drops below 0.05 between chi = 125 and chi = 250.
    chi, ms = calibrate_chi(fkpp_fem, fkpp_u0, 0.05, 125.0 / 8, 1e4)
    assert 125.0 < chi <= 250.0
    assert scsa_error(fkpp_fem, fkpp_u0, ms) <= 0.05
    below = solve_schrodinger_spectrum(fkpp_fem, fkpp_u0, chi - 125.0 / 2**8, 10)
    assert scsa_error(fkpp_fem, fkpp_u0, below) > 0.05


def test_calibrate_reports_best_on_failure(fkpp_fem, fkpp_u0):
    with pytest.raises(CalibrationError) as info:
        calibrate_chi(fkpp_fem, fkpp_u0, 1e-6, 100.0, 800.0)
    assert info.value.best_chi in (100.0, 200.0, 400.0, 800.0)
    assert info.value.best_error > 1e-6


def test_calibrate_infinite_tolerance(fkpp_fem, fkpp_u0):
    chi, _ = calibrate_chi(fkpp_fem, fkpp_u0, np.inf, 7.0, 8.0)
    assert chi == 7.0


@pytest.mark.xfail(strict=True, reason="the semi-classical error of this datum plateaus near 2e-3; "
                   "1e-3 is never reached below chi = 1e5 (see decisions ledger)")
def test_calibrate_fkpp_to_tight_tolerance(fkpp_fem, fkpp_u0):
    chi, ms = calibrate_chi(fkpp_fem, fkpp_u0, 1e-3, 1.0, 1e5)
    assert 250 <= chi <= 1000 and 4 <= ms.n_negative <= 6


@pytest.mark.xfail(strict=True, reason="error rises from chi=250 to chi=500 on this datum (see decisions ledger)")
def test_scsa_error_monotone_along_doubling(fkpp_fem, fkpp_u0):
    chis = 62.5 * 2.0 ** np.arange(7)
    errs = [scsa_error(fkpp_fem, fkpp_u0, solve_schrodinger_spectrum(fkpp_fem, fkpp_u0, c, 30)) for c in chis]
    assert all(b <= a for a, b in zip(errs, errs[1:]))


def test_scsa_error_decreases_over_wide_chi_range(fkpp_fem, fkpp_u0):
    errs = [scsa_error(fkpp_fem, fkpp_u0, solve_schrodinger_spectrum(fkpp_fem, fkpp_u0, c, 30))
            for c in (62.5, 4000.0)]
    assert errs[1] < 0.05 * errs[0]


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 50.0), st.floats(1.0, 4.0), st.sampled_from(["soliton", "gaussian"]))
def test_negative_count_monotone_in_chi(chi, factor, shape):
    fem = _small_fem()
    x = fem.mesh.x
    u = 2 / np.cosh(x) ** 2 if shape == "soliton" else np.exp(-x**2)
    n1 = solve_schrodinger_spectrum(fem, u, chi, 40).n_negative
    n2 = solve_schrodinger_spectrum(fem, u, chi * factor, 40).n_negative
    assert n2 >= n1


_SMALL = {}


def _small_fem():
    if "fem" not in _SMALL:
        _SMALL["fem"] = assemble(build_interval_mesh(-8, 8, 160, NEUMANN))
    return _SMALL["fem"]
