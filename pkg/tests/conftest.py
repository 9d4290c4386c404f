import numpy as np
import pytest
from hypothesis import settings

from amblab import tf
from amblab.tf import TimeGrid

settings.register_profile("amblab", max_examples=25, deadline=None, derandomize=True)
settings.load_profile("amblab")

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def square64():
    return TimeGrid.square(64)


@pytest.fixture(scope="session")
def wide256():
    return TimeGrid(256, 12 / 256)


def random_unit(grid, rng):
    return tf.random_signal(grid, rng)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
