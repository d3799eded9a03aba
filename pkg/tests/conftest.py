import numpy as np
import pytest

from optinit.mdp import random_mdp


@pytest.fixture
def seed7_mdp():
    return random_mdp(10, 3, 0.9, random_state=7)


def direct_q(mdp, policy):
    """Independent oracle: solve (I - gamma P_pi) v = r_pi on states, then one backup."""
    S = mdp.n_states
    states = np.arange(S)
    P_pi = mdp.transition[states, policy]
    r = mdp.expected_reward
    v = np.linalg.solve(np.eye(S) - mdp.gamma * P_pi, r[states, policy])
    return r + mdp.gamma * mdp.transition @ v


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
