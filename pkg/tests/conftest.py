import numpy as np
import pytest

from qubo_denoise.core import QuboMatrix
from qubo_denoise.rbm import RbmParams


def random_qubo(n, rng, scale=1.0):
    a = rng.uniform(-scale, scale, size=(n, n))
    return QuboMatrix((a + a.T) / 2)


def random_rbm(v, h, rng, scale=1.0):
    return RbmParams(rng.normal(0, scale, (h, v)), rng.normal(0, scale, v), rng.normal(0, scale, h))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    lines = test_acceptance.recorded_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
