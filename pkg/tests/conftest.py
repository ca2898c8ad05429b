import numpy as np
import pytest

from pgbaseline.envs import default_three_state
from pgbaseline.mdp import TabularMdp

ACCEPTANCE_LINES = []


def random_mdp(rng, n_states, n_actions, dense=True):
    P = rng.random((n_states, n_actions, n_states)) + (0.05 if dense else 0.0)
    P /= P.sum(axis=2, keepdims=True)
    return TabularMdp(P, rng.normal(size=n_states))


@pytest.fixture
def three_state():
    return default_three_state()


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def acceptance():
    """Record a one-line PASS/FAIL verdict for the end-of-run summary."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
