import numpy as np
import pytest

from alprom.mesh import assemble, build_interval_mesh
from alprom.problems import exact_one_soliton
from alprom.spectral import solve_schrodinger_spectrum

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s[2:])):
        ok, detail = ACCEPTANCE_RESULTS[name]
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")


@pytest.fixture(scope="session")
def soliton_fem():
    """(-15, 15) with 500 elements, homogeneous Dirichlet."""
    return assemble(build_interval_mesh(-15.0, 15.0, 500))


@pytest.fixture(scope="session")
def soliton_u0(soliton_fem):
    return exact_one_soliton(soliton_fem.mesh.x, 0.0, 4.0)


@pytest.fixture(scope="session")
def soliton_modes(soliton_fem, soliton_u0):
    return solve_schrodinger_spectrum(soliton_fem, soliton_u0, 1.0, 10)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_acceptance():
    """``record(name, ok, detail)`` stores one line for the acceptance summary."""
    def record(name, ok, detail):
        ACCEPTANCE_RESULTS[name] = (bool(ok), detail)
    return record
