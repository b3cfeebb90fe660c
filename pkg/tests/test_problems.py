import warnings

import numpy as np
import pytest

from alprom.errors import ConfigError, MeshError
from alprom.mesh import NEUMANN, Mesh, assemble, build_interval_mesh, build_structured_rect_mesh
from alprom.problems import (THREE_SOLITON_DATA, ProblemSpec, SolitonData, exact_multi_soliton,
                             exact_one_soliton, exact_three_soliton, fd_first_derivative, fd_third_derivative,
                             fkpp1d_initial, fkpp_reference_solve, fkpp_rhs, kdv_rhs, multi_soliton_logdet)


def local_maxima(x, u, rel=0.1):
    i = np.flatnonzero((u[1:-1] > u[:-2]) & (u[1:-1] > u[2:]) & (u[1:-1] > rel * u.max())) + 1
    return x[i], u[i]


# --- KdV right-hand side ------------------------------------------------------

def test_kdv_constant_and_linear():
    fem = assemble(build_interval_mesh(-1, 1, 40))
    x = fem.mesh.x
    f = kdv_rhs(fem, np.full(41, 3.0))
    assert np.abs(f).max() <= 1e-9
    f = kdv_rhs(fem, x)
    np.testing.assert_allclose(f[1:-1], -6 * x[1:-1], atol=1e-9)
    assert f[0] == 0.0 and f[-1] == 0.0


def test_stencils_polynomial_exactness():
    x = np.linspace(-1, 2, 31)
    h = x[1] - x[0]
    quad = 1 + 2 * x - 3 * x**2
    np.testing.assert_allclose(fd_first_derivative(quad, h), 2 - 6 * x, atol=1e-10)
    quart = x**4 - 2 * x**3 + x
    np.testing.assert_allclose(fd_third_derivative(quart, h), 24 * x - 12, atol=1e-7)


def test_first_derivative_cubic_error_is_second_order():
    errs = []
    for n in (20, 40):
        x = np.linspace(0, 1, n + 1)
        errs.append(np.abs(fd_first_derivative(x**3, x[1] - x[0]) - 3 * x**2)[1:-1].max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=1e-6)


def test_kdv_travelling_wave_identity():
    """For a soliton of speed beta, F(u) = -beta u_x; the residual shrinks like h^2."""
    beta = 4.0
    errs = []
    for n in (400, 800):
        fem = assemble(build_interval_mesh(-15, 15, n))
        x = fem.mesh.x
        u = exact_one_soliton(x, 0.0, beta)
        s = np.sqrt(beta) / 2
        ux = -beta * s * np.tanh(s * x) / np.cosh(s * x) ** 2
        errs.append(np.abs(kdv_rhs(fem, u) + beta * ux).max() / np.abs(beta * ux).max())
    assert errs[1] < 5e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_kdv_rejects_bad_meshes():
    with pytest.raises(MeshError):
        kdv_rhs(assemble(build_structured_rect_mesh((0, 1), (0, 1), 3, 3)), np.zeros(16))
    x = np.array([0.0, 0.1, 0.3, 0.4, 0.5, 0.7, 1.0])
    mesh = Mesh(x, np.column_stack([np.arange(6), np.arange(1, 7)]), [0, 6])
    with pytest.raises(MeshError):
        kdv_rhs(assemble(mesh), np.zeros(7))


# --- FKPP right-hand side ------------------------------------------------------

@pytest.mark.parametrize("mesh", [build_interval_mesh(0, 1, 30, NEUMANN),
                                  build_structured_rect_mesh((0, 2), (0, 1), 6, 4, NEUMANN)])
def test_fkpp_steady_states(mesh):
    fem = assemble(mesh)
    n = fem.n_nodes
    assert np.abs(fkpp_rhs(fem, np.zeros(n), 1e3)).max() == 0.0
    assert np.abs(fkpp_rhs(fem, np.ones(n), 1e3)).max() <= 1e-9
    np.testing.assert_allclose(fkpp_rhs(fem, np.full(n, 0.5), 8.0), 2.0, atol=1e-12)


def test_fkpp_laplacian_of_sine():
    fem = assemble(build_interval_mesh(0, 1, 400))
    x = fem.mesh.x
    f = fkpp_rhs(fem, np.sin(np.pi * x), 1e-300)
    inner = slice(10, -10)
    np.testing.assert_allclose(f[inner], -np.pi**2 * np.sin(np.pi * x[inner]), rtol=0.01)
    assert f[0] == 0.0 and f[-1] == 0.0


def test_problem_spec_validation():
    with pytest.raises(ConfigError):
        ProblemSpec("fkpp", alpha=0.0)
    with pytest.raises(ConfigError):
        ProblemSpec("heat")
    assert ProblemSpec("KdV").kind == "kdv"


# --- exact solutions -----------------------------------------------------------

def test_one_soliton_values():
    assert exact_one_soliton(0.0, 0.0, 4.0) == pytest.approx(2.0)
    x = np.linspace(0, 30, 30001)
    assert x[np.argmax(exact_one_soliton(x, 5.0, 4.0))] == pytest.approx(20.0, abs=1e-3)
    t = 1.7
    assert x[np.argmax(exact_one_soliton(x, t, 2.5))] == pytest.approx(2.5 * t, abs=1e-3)


def test_soliton_data_validation():
    with pytest.raises(ValueError):
        SolitonData([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        SolitonData([1.0, 2.0], [1.5, 1.0])
    with pytest.raises(ValueError):
        SolitonData([-1.0], [1.0])
    assert THREE_SOLITON_DATA.count == 3


@pytest.mark.parametrize("k", [0.5, 1.0, 1.3])
def test_single_soliton_reduction(k):
    """With c^2 = 2k the determinant formula is the soliton of speed 4k^2 centred at 0."""
    data = SolitonData([np.sqrt(2 * k)], [k])
    x = np.linspace(-10, 10, 201)
    for t in (0.0, 0.3):
        np.testing.assert_allclose(exact_multi_soliton(x, t, data), exact_one_soliton(x, t, 4 * k * k), atol=1e-6)


def test_logdet_matches_direct_evaluation():
    k, c = THREE_SOLITON_DATA.k, THREE_SOLITON_DATA.c
    for x in (-5.0, 0.0, 3.0):
        for t in (0.0, 0.5):
            kk = k[:, None] + k[None, :]
            a = np.outer(c, c) / kk * np.exp(kk * x - 4 * (k[:, None] ** 3 + k[None, :] ** 3) * t)
            mat = np.eye(3) + a
            np.linalg.cholesky(mat)
            assert multi_soliton_logdet(x, t, THREE_SOLITON_DATA)[0] == pytest.approx(
                np.linalg.slogdet(mat)[1], rel=1e-12, abs=1e-12)


def test_logdet_survives_large_exponents():
    vals = multi_soliton_logdet(np.array([-400.0, 400.0]), 0.0, THREE_SOLITON_DATA)
    assert np.all(np.isfinite(vals))
    u = exact_three_soliton(np.array([-300.0, 300.0]), 0.0)
    # the log-determinant grows like |x| there, so the second difference carries ~1e-7 roundoff
    assert np.all(np.isfinite(u)) and np.abs(u).max() < 1e-5


def test_three_soliton_peaks():
    x = np.linspace(-15, 15, 3001)
    assert len(local_maxima(x, exact_three_soliton(x, 0.0))[0]) == 3
    assert len(local_maxima(x, exact_three_soliton(x, 0.5))[0]) == 2


def test_three_soliton_separates_with_expected_heights():
    t = 6.0
    x = np.linspace(-20, 160, 36001)
    _, heights = local_maxima(x, exact_three_soliton(x, t))
    np.testing.assert_allclose(np.sort(heights), np.sort(2 * THREE_SOLITON_DATA.k**2), rtol=0.02)


# --- full-order reference ------------------------------------------------------

def test_reference_keeps_unit_state():
    fem = assemble(build_interval_mesh(0, 1, 50, NEUMANN))
    traj = fkpp_reference_solve(fem, np.ones(51), 1e3, 7.5e-5, 20)
    assert np.abs(traj - 1.0).max() <= 1e-10


def test_reference_logistic_growth():
    fem = assemble(build_structured_rect_mesh((0, 1), (0, 1), 4, 4, NEUMANN))
    eps, alpha, dt, n = 1e-4, 2.0, 1e-3, 1000
    traj = fkpp_reference_solve(fem, np.full(fem.n_nodes, eps), alpha, dt, n)
    t = dt * n
    logistic = eps * np.exp(alpha * t) / (1 - eps + eps * np.exp(alpha * t))
    np.testing.assert_allclose(traj[-1], logistic, rtol=1e-4)
    assert traj[-1, 0] / eps == pytest.approx(np.exp(alpha), rel=1e-3)


def test_reference_bumps_merge_into_plateau():
    fem = assemble(build_interval_mesh(0, 1, 250))
    x = fem.mesh.x
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        traj = fkpp_reference_solve(fem, fkpp1d_initial(x), 1e3, 7.5e-5, 100)
    assert len(local_maxima(x, traj[0])[0]) == 2
    final = traj[-1]
    plateau = np.flatnonzero(final > 0.9)
    assert plateau.size > 0 and np.all(np.diff(plateau) == 1)
    assert x[plateau[0]] < 0.25 and x[plateau[-1]] > 0.75
    assert final.max() <= 1 + 1e-6 and final.min() >= -1e-6


def test_reference_warns_outside_invariant_region():
    fem = assemble(build_interval_mesh(0, 1, 50, NEUMANN))
    u0 = np.zeros(51)
    u0[25] = 1.0
    with pytest.warns(RuntimeWarning):
        fkpp_reference_solve(fem, u0, 1e3, 1e-2, 5)


def test_reference_does_not_monitor_dirichlet_data():
    # on this finer mesh Crank-Nicolson rings at the clamped boundary kink
    fem = assemble(build_interval_mesh(0, 1, 500))
    u0 = fkpp1d_initial(fem.mesh.x)
    u0[[0, -1]] = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        traj = fkpp_reference_solve(fem, u0, 1e3, 7.5e-5, 5)
    assert traj.min() < -1e-6
