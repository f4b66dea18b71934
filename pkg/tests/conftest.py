import numpy as np
import pytest

from gaussmac.model import MacChannel, SourceParams

ACCEPTANCE_LINES = []


@pytest.fixture
def src():
    return SourceParams(1.0, 0.5)


@pytest.fixture
def ch12():
    return MacChannel(1.0, 1.0, 2.0)


def lmmse_mse(cov, target, observed):
    """MSE of the linear MMSE estimate of ``cov[target]`` from ``observed`` indices."""
    cov = np.asarray(cov, dtype=float)
    k = cov[np.ix_(observed, observed)]
    c = cov[target, observed]
    return cov[target, target] - c @ np.linalg.solve(k, c)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
