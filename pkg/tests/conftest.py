import numpy as np
import pytest

from fracdiff.assembly import Coefficients, assemble, assemble_load, l2_project, logistic_source
from fracdiff.geometry import generate_mesh

SMALL_H = 0.07  # 111 nodes, small enough for dense oracles


@pytest.fixture(scope="session")
def small_mesh():
    return generate_mesh(SMALL_H)


@pytest.fixture(scope="session")
def small_sys(small_mesh):
    return assemble(small_mesh, Coefficients(mu=10.0))


@pytest.fixture(scope="session")
def psi_ones(small_sys):
    return l2_project(small_sys, assemble_load(small_sys.mesh, logistic_source(0.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
