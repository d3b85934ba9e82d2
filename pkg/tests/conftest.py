import numpy as np
import pytest

from pilotwave.core import SpatialGrid
from pilotwave.units import ELECTRON_MASS, HBAR, ground_state_width, harmonic_frequency, stiffness_from_si

F_SI = 1e12
F = stiffness_from_si(F_SI)
W = ground_state_width(F)
OMEGA = harmonic_frequency(F)
PERIOD = 2 * np.pi / OMEGA
M = ELECTRON_MASS


@pytest.fixture
def grid64():
    return SpatialGrid(-32.0, 32.0, 64)


@pytest.fixture
def trap_grid():
    return SpatialGrid(-256.0, 256.0, 256)


def coherent_center(x0, t):
    """Classical centre of a displaced ground-state packet released at rest."""
    return x0 * np.cos(OMEGA * t)


def free_width(w0, t, mass=M, hbar=HBAR):
    """Width parameter w(t) of a free packet exp(-x^2 / 2 w^2) released at t = 0."""
    return w0 * np.sqrt(1 + (hbar * t / (mass * w0**2)) ** 2)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
