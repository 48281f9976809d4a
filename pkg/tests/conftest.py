import numpy as np
import pytest

from ebchan.optimize import OptimizerConfig


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def fast_cfg():
    return OptimizerConfig(restarts=8, max_iters=1500, tol=1e-9, seed=3)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
