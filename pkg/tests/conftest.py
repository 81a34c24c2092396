import numpy as np
import pytest

from cgolab.spectral import make_grid


@pytest.fixture(scope="session")
def grid16():
    return make_grid(3, 16)


@pytest.fixture(scope="session")
def grid32():
    return make_grid(3, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES.values()):
            terminalreporter.write_line(line)
