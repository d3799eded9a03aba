"""Finite MDPs and exact dynamic-programming solvers.

An MDP is stored as dense ``(n_states, n_actions, n_states)`` tables of
transition probabilities and expected rewards. Terminal states are absorbing
self-loops with zero reward, so episodic and continuing problems share the
same evaluation code.

Policies are integer arrays mapping each state to an action; action-value
tables are float arrays of shape ``(n_states, n_actions)``.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.random import default_rng

from ._validation import (
    check_count,
    check_finite_table,
    check_gamma,
    check_index_array,
    check_positive,
)

DEFAULT_MAX_ITER = 10**6


class ConvergenceError(RuntimeError):
    """Raised when a solver exhausts its sweep budget."""


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """A finite MDP with expected rewards per ``(s, a, s')``.

    Parameters
    ----------
    transition : array-like of shape (n_states, n_actions, n_states)
        ``transition[s, a, s2]`` is the probability of moving to ``s2``.
    reward : array-like of shape (n_states, n_actions, n_states)
        Expected reward for the transition.
    gamma : float
        Discount factor in (0, 1].
    terminal_states : sequence of int
        Absorbing states. Each must self-loop with probability 1 and
        reward 0 under every action.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    terminal_states: tuple = field(default=())

    def __post_init__(self):
        P = check_finite_table(self.transition, "transition", 3)
        R = check_finite_table(self.reward, "reward", 3)
        n_states, n_actions, n_next = P.shape
        if n_states < 1 or n_actions < 1 or n_next != n_states:
            raise ValueError(f"transition shape {P.shape} is not (S, A, S)")
        if R.shape != P.shape:
            raise ValueError(f"reward shape {R.shape} != transition shape {P.shape}")
        if np.any(P < 0):
            raise ValueError("transition probabilities must be nonnegative")
        if not np.all(np.abs(P.sum(axis=2) - 1.0) <= 1e-12):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        terminals = tuple(sorted(set(int(s) for s in
                                     check_index_array(list(self.terminal_states),
                                                       n_states, "terminal_states"))))
        for s in terminals:
            if not (np.all(P[s, :, s] == 1.0) and np.all(R[s] == 0.0)):
                raise ValueError(f"terminal state {s} must self-loop with reward 0")
        P = P.copy()
        R = R.copy()
        P.flags.writeable = False
        R.flags.writeable = False
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "gamma", check_gamma(self.gamma))
        object.__setattr__(self, "terminal_states", terminals)

    @property
    def n_states(self):
        return self.transition.shape[0]

    @property
    def n_actions(self):
        return self.transition.shape[1]

    @property
    def expected_reward(self):
        """Expected one-step reward per ``(s, a)``."""
        return np.einsum("ijk,ijk->ij", self.transition, self.reward)

    def __eq__(self, other):
        if not isinstance(other, TabularMDP):
            return NotImplemented
        return (self.gamma == other.gamma
                and self.terminal_states == other.terminal_states
                and self.transition.shape == other.transition.shape
                and np.array_equal(self.transition, other.transition)
                and np.array_equal(self.reward, other.reward))

    __hash__ = None

    def to_dict(self):
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": self.gamma,
            "transition": self.transition.ravel().tolist(),
            "reward": self.reward.ravel().tolist(),
            "terminal_states": list(self.terminal_states),
        }

    @classmethod
    def from_dict(cls, data):
        shape = (data["n_states"], data["n_actions"], data["n_states"])
        return cls(
            transition=np.asarray(data["transition"], dtype=float).reshape(shape),
            reward=np.asarray(data["reward"], dtype=float).reshape(shape),
            gamma=data["gamma"],
            terminal_states=tuple(data.get("terminal_states", ())),
        )


def save_mdp(mdp, path):
    """Write ``mdp`` as indented JSON (flat C-order ``(s, a, s')`` arrays)."""
    Path(path).write_text(json.dumps(mdp.to_dict(), indent=1) + "\n")


def load_mdp(path):
    return TabularMDP.from_dict(json.loads(Path(path).read_text()))


def random_mdp(n_states, n_actions, gamma, random_state=None, reward_scale=1.0,
               terminal_states=()):
    """Dense random MDP with Dirichlet transitions and uniform rewards.

    Rewards are drawn from ``[-reward_scale, reward_scale]``. States listed in
    ``terminal_states`` are made absorbing.
    """
    rng = default_rng(random_state)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    R = rng.uniform(-reward_scale, reward_scale, size=(n_states, n_actions, n_states))
    for s in terminal_states:
        P[s] = 0.0
        P[s, :, s] = 1.0
        R[s] = 0.0
    # Dirichlet rows can miss 1 by a few ulps.
    P /= P.sum(axis=2, keepdims=True)
    return TabularMDP(P, R, gamma, tuple(terminal_states))


def check_policy(policy, mdp):
    policy = np.asarray(policy)
    if policy.shape != (mdp.n_states,):
        raise ValueError(f"policy must have shape ({mdp.n_states},), got {policy.shape}")
    return check_index_array(policy, mdp.n_actions, "policy")


def _stop_threshold(tolerance, gamma, q):
    # For gamma < 1 a residual of tol * (1 - gamma) bounds the distance to the
    # fixed point by tol. The floor keeps the target above float resolution.
    floor = 16 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(q))))
    if gamma < 1.0:
        return max(tolerance * (1.0 - gamma), floor)
    return max(tolerance, floor)


def policy_evaluation(mdp, policy, tolerance=1e-10, max_iter=DEFAULT_MAX_ITER):
    """Action values of a deterministic policy by successive approximation.

    Starts from ``q = 0`` and sweeps the Bellman expectation backup until the
    max-norm residual is at most ``tolerance`` (and, for ``gamma < 1``, small
    enough that the returned table is within ``tolerance`` of the fixed point).

    Raises
    ------
    ConvergenceError
        If ``max_iter`` sweeps are not enough. With ``gamma == 1`` this is how
        an improper policy shows up.
    """
    tolerance = check_positive(tolerance, "tolerance")
    policy = check_policy(policy, mdp)
    r = mdp.expected_reward
    P = mdp.transition
    gamma = mdp.gamma
    states = np.arange(mdp.n_states)
    q = np.zeros_like(r)
    for _ in range(max_iter):
        q_new = r + gamma * (P @ q[states, policy])
        residual = np.max(np.abs(q_new - q))
        q = q_new
        if residual <= _stop_threshold(tolerance, gamma, q):
            return q
    raise ConvergenceError(
        f"policy evaluation did not converge in {max_iter} sweeps "
        f"(gamma={gamma}); the policy may never reach a terminal state")


def value_iteration(mdp, tolerance=1e-10, max_iter=DEFAULT_MAX_ITER):
    """Optimal action values ``q*`` by value iteration from ``q = 0``."""
    tolerance = check_positive(tolerance, "tolerance")
    r = mdp.expected_reward
    P = mdp.transition
    gamma = mdp.gamma
    q = np.zeros_like(r)
    for _ in range(max_iter):
        q_new = r + gamma * (P @ q.max(axis=1))
        residual = np.max(np.abs(q_new - q))
        q = q_new
        if residual <= _stop_threshold(tolerance, gamma, q):
            return q
    raise ConvergenceError(f"value iteration did not converge in {max_iter} sweeps")


def bellman_residual(mdp, q, policy=None):
    """Max-norm residual of ``q`` under the expectation (``policy`` given)
    or optimality backup."""
    q = np.asarray(q, dtype=float)
    if policy is None:
        v = q.max(axis=1)
    else:
        v = q[np.arange(mdp.n_states), check_policy(policy, mdp)]
    return float(np.max(np.abs(mdp.expected_reward + mdp.gamma * (mdp.transition @ v) - q)))


def greedy_policy(q, tie_rule="lowest", random_state=None):
    """Greedy action per state.

    ``tie_rule="lowest"`` picks the smallest maximizing index; ``"random"``
    picks uniformly among maximizers using ``random_state``.
    """
    q = check_finite_table(q, "q", 2)
    if tie_rule == "lowest":
        return np.argmax(q, axis=1)
    if tie_rule == "random":
        rng = default_rng(random_state)
        best = q == q.max(axis=1, keepdims=True)
        return np.array([rng.choice(np.flatnonzero(row)) for row in best])
    raise ValueError(f"unknown tie_rule {tie_rule!r}")


def transform_mdp_rewards(mdp, scale, shift):
    """Copy of ``mdp`` with every nonterminal reward mapped to ``r / scale + shift``.

    Terminal self-loops keep reward 0.
    """
    scale = check_positive(scale, "scale")
    R = mdp.reward / scale + float(shift)
    for s in mdp.terminal_states:
        R[s] = 0.0
    return TabularMDP(mdp.transition, R, mdp.gamma, mdp.terminal_states)


def chain_mdp(n_states=5, gamma=0.9, goal_reward=1.0):
    """Deterministic chain: action 1 moves right, action 0 moves left.

    State ``n_states - 1`` is a terminal goal; entering it pays
    ``goal_reward``. Moving left from state 0 stays put.
    """
    n_states = check_count(n_states, "n_states", min_val=2)
    goal = n_states - 1
    P = np.zeros((n_states, 2, n_states))
    R = np.zeros_like(P)
    for s in range(goal):
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, s + 1] = 1.0
    R[goal - 1, 1, goal] = goal_reward
    P[goal, :, goal] = 1.0
    return TabularMDP(P, R, gamma, (goal,))
