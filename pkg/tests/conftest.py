import math

import numpy as np
import pytest

from nonlocal_ch.grid import GridFunction, PeriodicGrid
from nonlocal_ch.kernel import ModelParams, make_gaussian_kernel


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture
def grid8():
    return PeriodicGrid.square(8)


@pytest.fixture
def grid16():
    return PeriodicGrid.square(16)


@pytest.fixture
def kernel8(grid8):
    return make_gaussian_kernel(grid8, math.pi / 4)


@pytest.fixture
def kernel16(grid16):
    return make_gaussian_kernel(grid16, math.pi / 4)


@pytest.fixture
def params8(kernel8):
    return ModelParams.from_kernel(1.0, kernel8)


def random_field(grid, rng, scale=1.0):
    return GridFunction(grid, scale * rng.standard_normal(grid.shape))


# acceptance criteria report, printed once at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
