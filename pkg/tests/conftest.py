import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    """Collects one line per acceptance criterion for the terminal summary."""
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def path_graph():
    return np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])


def two_triangles():
    A = np.zeros((6, 6), dtype=int)
    for block in (range(3), range(3, 6)):
        for i in block:
            for j in block:
                if i != j:
                    A[i, j] = 1
    return A


def complete(n):
    return np.ones((n, n), dtype=int) - np.eye(n, dtype=int)
