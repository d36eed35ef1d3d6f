import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from sefrag.model import SecretKey  # noqa: E402


@pytest.fixture
def key():
    return SecretKey(bytes.fromhex("000102030405060708090a0b0c0d0e0f"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS, line

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(line(n))
