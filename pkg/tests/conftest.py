import math

import numpy as np
import pytest

from rvkit.boundary import RoundSphere, ellipse
from rvkit.expansion import expand_minimal_graph
from rvkit.renvol import riesz_rv
from rvkit.solver import ProfileTail, end_expansions, solve_rotational


def hemisphere(R=1.0, m=2, order=None):
    neumann = -0.125 * R ** -3 if m == 3 else None
    return expand_minimal_graph(RoundSphere(R, m, m - 1), m, m, neumann=neumann, order=order)


def d_family(d, rho=1.0):
    return rho * math.exp(-d / 2), rho * math.exp(d / 2)


def catenoid_volume(R1, R2, delta=0.01):
    sol = solve_rotational("catenoid", {"R1": R1, "R2": R2})
    gs = end_expansions(sol)
    return riesz_rv(gs, ProfileTail(sol), delta).value, gs


@pytest.fixture(scope="session")
def disk():
    return hemisphere(1.0, 2)


@pytest.fixture(scope="session")
def ellipse_graph():
    b = ellipse(1.5, 1.0, P=32)
    rng = np.random.default_rng(3)
    s = 2 * np.pi * np.arange(b.P) / b.P
    neumann = 0.2 * np.cos(2 * s) + 0.05 * rng.normal() * np.sin(s)
    return expand_minimal_graph(b, 2, 2, neumann=neumann)


@pytest.fixture(scope="session")
def catenoid():
    return catenoid_volume(*d_family(0.5))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
