import numpy as np
import pytest

from snnopt.problems import Instance

S2 = np.sqrt(2) / 2


@pytest.fixture
def three_neuron():
    """Rows e1, e2 and the diagonal; x = (1, 2)."""
    return Instance(np.array([[1.0, 0.0], [0.0, 1.0], [S2, S2]]), np.array([1.0, 2.0]))


@pytest.fixture
def identity2():
    return Instance(np.eye(2), np.array([1.0, 2.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Append ``(criterion, passed, detail)`` lines shown in the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(lines, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
