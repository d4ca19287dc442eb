import functools
import warnings

import numpy as np
import pytest

from bethe_dimer.bae import CompletenessWarning, find_all_solutions
from bethe_dimer.integrable import ABAParams

GRID_ETA = (0.5, 1.0, 2.0)
GRID_OMEGA = (0.0, 0.3, 1.0)
GRID_NMAX = 8

# filled by tests/test_acceptance.py, printed after the run
ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def solutions(eta: float, omega: float, N: int):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CompletenessWarning)
        return tuple(find_all_solutions(ABAParams(eta, omega), N))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
