import numpy as np
import pytest

from foldylax.cluster import BubbleCluster, MaterialParams, derive_coupling
from foldylax.signal import GaussianModulated, TimeGrid, forcing_vector
from foldylax.water import scene

OMEGA_M = 4.8795e-5


@pytest.fixture(scope="session")
def water():
    mat, cl, cd = scene()
    return mat, cl, cd


@pytest.fixture(scope="session")
def mat():
    return MaterialParams(1000.0, 1000.0 * 1480.0 ** 2, 1.4e11)


@pytest.fixture(scope="session")
def triangle(mat):
    cl = BubbleCluster(np.array([[0, 0, 0], [0.02, 0, 0], [0.01, 0.03, 0]], float),
                       3e-3, 0.0)
    return cl, derive_coupling(cl, mat, OMEGA_M)


@pytest.fixture(scope="session")
def triangle_forcing(mat, triangle):
    cl, cd = triangle
    grid = TimeGrid.from_n(6e-4, 4096)
    pulse = GaussianModulated(1.0, 1.0 / OMEGA_M, 4.0 * OMEGA_M)
    return grid, forcing_vector(cl, [0.1, 0.05, 0.0], pulse, mat, grid)


def rel_l2(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def report():
    def _record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
