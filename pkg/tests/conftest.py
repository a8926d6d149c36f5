import numpy as np
import pytest

from condist.dgp import draw, get_dgp
from condist.kernels import make_spec


@pytest.fixture
def dgp_a():
    return get_dgp("A")


@pytest.fixture
def epa():
    return make_spec()


@pytest.fixture
def sample_a(dgp_a):
    return draw(dgp_a, 2000, 7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
