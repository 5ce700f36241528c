import sys

import numpy as np
import pytest

from photoexcite import AtomParams, build_mode_grid, default_grid


@pytest.fixture(scope="session")
def atom():
    return AtomParams(gamma=1.0, t0=0.0)


@pytest.fixture(scope="session")
def grid(atom):
    return default_grid(atom)


@pytest.fixture(scope="session")
def small_grid(atom):
    # cheap grid for structural tests; too narrow for accuracy checks
    return build_mode_grid(atom, 40.0, 401)


def overlap(a, b):
    return abs(np.vdot(a.mode_amps, b.mode_amps)) ** 2


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
