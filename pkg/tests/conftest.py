import numpy as np
import pytest

from dhtexp.exponents import HTInstance, example1_instance


def bsc(p):
    return np.array([[1.0 - p, p], [p, 1.0 - p]])


@pytest.fixture(scope="session")
def ex1():
    return example1_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_instance(rng, nu=2, nv=2, nx=2, ny=2, tau=1.0):
    P = rng.dirichlet(np.ones(nu * nv)).reshape(nu, nv)
    Q = rng.dirichlet(np.ones(nu * nv)).reshape(nu, nv)
    W = rng.dirichlet(np.ones(ny), size=nx)
    return HTInstance.from_arrays(P, Q, W, tau=tau)


ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, passed, detail)``."""

    def record(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")
