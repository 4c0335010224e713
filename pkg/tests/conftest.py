import numpy as np
import pytest

import tdho


def rk4_fixed(rhs, t0, y0, t1, n):
    """Classical fixed-step RK4, used as an independent oracle."""
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / n
    t = t0
    for _ in range(n):
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += h
    return y


def smooth_table(seed=3, t_end=30.0, n=301):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, t_end, n)
    w2 = 1.0 + sum(0.1 * rng.normal() * np.sin(k * 0.2 * t + rng.uniform(0, 2 * np.pi))
                   for k in range(1, 4))
    return tdho.Tabulated(t, w2)


@pytest.fixture
def floquet():
    return tdho.Floquet(1.0, 0.3, 2.0)


@pytest.fixture
def profiles():
    return [
        tdho.Constant(1.0),
        tdho.Floquet(1.0, 0.1, 2.0),
        tdho.Floquet(1.0, 0.3, 2.0),
        tdho.LinearRampOfOmegaSq(1.0, 0.05),
        smooth_table(),
    ]


# one line per acceptance criterion, echoed after the test session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
