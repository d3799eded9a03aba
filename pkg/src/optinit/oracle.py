"""Self-checks of the value-shift identities against exact solvers.

Each check returns an :class:`OracleResult`; :func:`run_all` runs the whole
suite (this is what ``optinit oracle-check`` prints).
"""

from dataclasses import dataclass

import numpy as np

from .features import SparseBinaryFeatures, dot, stack_with_negation
from .mdp import greedy_policy, policy_evaluation, random_mdp, transform_mdp_rewards
from .rewards import EpisodeClock, RewardTransform, discounted_return, termination_reward


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    max_error: float
    cases: int

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.cases} cases, max error {self.max_error:.3g}"


def linear_solve_q(mdp, policy):
    """Exact ``q_pi`` from ``(I - gamma P_pi) q = r`` over state-action pairs."""
    S, A = mdp.n_states, mdp.n_actions
    policy = np.asarray(policy)
    # Row (s, a) moves to (s2, policy[s2]) with probability P[s, a, s2].
    M = np.zeros((S * A, S * A))
    cols = np.arange(S) * A + policy
    M[:, cols] = mdp.transition.reshape(S * A, S)
    q = np.linalg.solve(np.eye(S * A) - mdp.gamma * M, mdp.expected_reward.ravel())
    return q.reshape(S, A)


def check_shift_identity(n_mdps=100, tolerance=1e-10, bound=1e-8, random_state=0):
    """Shifted-and-normalized values equal ``q / c - 1`` on random continuing MDPs."""
    rng = np.random.default_rng(random_state)
    worst = 0.0
    for i in range(n_mdps):
        gamma = (0.5, 0.9, 0.99)[i % 3]
        reward_scale = rng.uniform(0.1, 10)
        mdp = random_mdp(10, 3, gamma, rng, reward_scale=reward_scale)
        policy = rng.integers(0, 3, size=10)
        # A first-reward magnitude on the same scale as the rewards.
        scale = reward_scale * rng.uniform(0.1, 1.0)
        q = policy_evaluation(mdp, policy, tolerance)
        q_shift = policy_evaluation(transform_mdp_rewards(mdp, scale, gamma - 1), policy, tolerance)
        worst = max(worst, float(np.max(np.abs(q_shift - (q / scale - 1)))))
    return OracleResult("shift identity q~ = q/|r1st| - 1", worst <= bound, worst, n_mdps)


def check_linear_solve(n_mdps=20, tolerance=1e-10, bound=1e-9, random_state=1):
    """Iterative policy evaluation agrees with a direct linear solve."""
    rng = np.random.default_rng(random_state)
    worst = 0.0
    for i in range(n_mdps):
        mdp = random_mdp(10, 3, (0.5, 0.9, 0.99)[i % 3], rng)
        policy = rng.integers(0, 3, size=10)
        err = np.max(np.abs(policy_evaluation(mdp, policy, tolerance) - linear_solve_q(mdp, policy)))
        worst = max(worst, float(err))
    return OracleResult("policy evaluation vs linear solve", worst <= bound, worst, n_mdps)


def random_episode_rewards(rng, k):
    """Sparse raw rewards of length ``k`` on a random scale."""
    scale = 10.0 ** rng.uniform(-2, 3)
    mask = rng.random(k) < 0.2
    return np.where(mask, rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 2.0, size=k), 0.0) * scale


def padding_gap(raw, T, gamma):
    """|terminated return - padded return| for one episode of raw rewards.

    The terminated episode ends at step ``k = len(raw)`` and adds the
    termination value; the padded one continues with ``T - k + 1`` zero
    rewards instead.
    """
    k = len(raw)
    ended = RewardTransform(gamma=gamma)
    terminated = discounted_return([ended.observe_reward(r) for r in raw], gamma,
                                   termination_reward(EpisodeClock(k, T), gamma))
    padded_tr = RewardTransform(gamma=gamma)
    padded_raw = np.concatenate([raw, np.zeros(T - k + 1)])
    padded = discounted_return([padded_tr.observe_reward(r) for r in padded_raw], gamma)
    return abs(terminated - padded)


def check_termination_padding(n_episodes=1000, bound=1e-12, random_state=2):
    rng = np.random.default_rng(random_state)
    worst = 0.0
    for i in range(n_episodes):
        gamma = (0.9, 0.99, 1.0)[i % 3]
        T = int(rng.integers(1, 201))
        k = int(rng.integers(1, T + 1))
        worst = max(worst, padding_gap(random_episode_rewards(rng, k), T, gamma))
    return OracleResult("termination reward = zero padding", worst <= bound, worst, n_episodes)


def check_argmax_invariance(n_tables=100, random_state=3):
    rng = np.random.default_rng(random_state)
    mismatches = 0
    for i in range(n_tables):
        shape = (int(rng.integers(1, 20)), int(rng.integers(1, 6)))
        if i % 2:
            q = rng.integers(-3, 4, size=shape).astype(float)
        else:
            q = rng.uniform(-10, 10, size=shape)
        c, d = rng.uniform(0.1, 10), rng.uniform(-100, 100)
        mismatches += not np.array_equal(greedy_policy(q), greedy_policy(c * q + d))
    return OracleResult("greedy policy affine invariance", mismatches == 0, float(mismatches), n_tables)


def check_stacking(n_vectors=1000, bound=1e-12, random_state=4):
    rng = np.random.default_rng(random_state)
    worst = 0.0
    ok = True
    for _ in range(n_vectors):
        n = int(rng.integers(1, 129))
        f = SparseBinaryFeatures(n, np.flatnonzero(rng.random(n) < rng.random()))
        stacked = stack_with_negation(f)
        ok &= stacked.norm == n and stacked.total == 2 * n
        worst = max(worst, abs(dot(np.full(2 * n, 1.0 / n), stacked) - 1.0))
    return OracleResult("stacked features have norm n and unit value", ok and worst <= bound,
                        worst, n_vectors)


def run_all():
    return [
        check_shift_identity(),
        check_linear_solve(),
        check_termination_padding(),
        check_argmax_invariance(),
        check_stacking(),
    ]
