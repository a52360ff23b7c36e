import warnings

import numpy as np
import pytest

from galerkin_vi.core import make_spec
from galerkin_vi.models import harmonic_oscillator, kepler


def spec(s, r, kind="gauss", **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return make_spec(s, r, kind, **kw)


# (s, r, kind) for the families covered by the convergence tables
GAUSS_FAMILY = [(s, r, "gauss") for s in range(1, 5) for r in range(s, 5)]
LOBATTO_FAMILY = [(s, r, "lobatto") for s in range(1, 6) for r in range(max(2, s), 6)]


def harmonic_step_oracles():
    """Independent one-step maps on z = (q, p) for L = v^2/2 - q^2/2 (dim 1)."""
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    I = np.eye(2)

    def midpoint(z, h):
        return np.linalg.solve(I - h / 2 * A, (I + h / 2 * A) @ z)

    def verlet(z, h):
        q, p = z
        p_half = p - h / 2 * q
        q1 = q + h * p_half
        return np.array([q1, p_half - h / 2 * q1])

    def gauss2(z, h):
        r3 = np.sqrt(3.0)
        a = np.array([[0.25, 0.25 - r3 / 6], [0.25 + r3 / 6, 0.25]])
        # stage slopes K_i = A (z + h sum_j a_ij K_j), a 4x4 linear system
        big = np.eye(4) - h * np.kron(a, A)
        K = np.linalg.solve(big, np.concatenate([A @ z, A @ z])).reshape(2, 2)
        return z + h * 0.5 * (K[0] + K[1])

    return {"midpoint": midpoint, "verlet": verlet, "gauss2": gauss2}


@pytest.fixture(scope="session")
def ho1():
    return harmonic_oscillator(1)


@pytest.fixture(scope="session")
def ho2():
    return harmonic_oscillator(2)


@pytest.fixture(scope="session")
def kep():
    return kepler()


# one verdict line per acceptance criterion, printed at the end of the run
CRITERIA = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[key])
