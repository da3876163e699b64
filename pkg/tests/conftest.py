import numpy as np
import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, n=6):
    A = rng.normal(size=(n, n))
    scale = 10.0 ** rng.uniform(-2, 3, size=n)
    return A @ np.diag(scale) @ A.T + 1e-3 * np.eye(n)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
