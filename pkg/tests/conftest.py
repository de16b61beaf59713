import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from fellerx.fixtures import all_cases, brownian, smooth_g  # noqa: E402


@pytest.fixture(scope="session")
def bm():
    return brownian()


@pytest.fixture(scope="session")
def cases():
    return {fx.name: fx for fx in all_cases()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def g_smooth():
    return smooth_g


# one line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def record(number, passed, detail):
    ACCEPTANCE[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
