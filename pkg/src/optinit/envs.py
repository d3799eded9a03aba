"""Small sparse-reward environments behind one reset/step interface.

* :class:`CrossingWorld` - cross a road of moving cars; +1 per crossing,
  fixed-length episodes. Random play rarely scores.
* :class:`CorridorWorld` - walk right down a long corridor past hazards and
  one-off +100 pickups to a large terminal reward.
* :class:`TabularEnv` - sample from any :class:`~optinit.mdp.TabularMDP`;
  :func:`chain_env` builds the deterministic chain fixture.

Every environment draws all randomness from the generator it was seeded with,
reports rewards in their original scale, and forces termination at step ``T``.
"""

from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
from numpy.random import default_rng

from ._validation import check_count
from .features import GridFeatureSpec, SparseBinaryFeatures
from .mdp import TabularMDP, chain_mdp
from .rewards import EpisodeClock


@dataclass(frozen=True)
class EnvStep:
    observation: Any
    raw_reward: float
    terminal: bool
    clock: EpisodeClock
    truncated: bool = False


class NotExportableError(ValueError):
    """The environment has no tabular export (or it would be too large)."""


class Environment:
    """Base class. Subclasses implement ``_reset``, ``_transition`` and ``features_for``."""

    n_actions: int
    feature_dim: int
    #: Number of active features for every (state, action), or None if it varies.
    feature_norm = None

    def __init__(self, T, random_state=None):
        self.T = check_count(T, "T")
        self.random_state = random_state
        self._rng = default_rng(random_state)
        self._clock = None
        self._done = True

    def reset(self):
        self._clock = EpisodeClock(0, self.T)
        self._done = False
        self._obs = self._reset()
        return EnvStep(self._obs, 0.0, False, self._clock)

    def step(self, action):
        if self._clock is None:
            raise RuntimeError("call reset() before step()")
        if self._done:
            raise RuntimeError("episode is over; call reset()")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range [0, {self.n_actions})")
        self._obs, reward, terminal = self._transition(int(action))
        self._clock = self._clock.advance()
        truncated = self._clock.expired and not terminal
        self._done = terminal or truncated
        return EnvStep(self._obs, float(reward), self._done, self._clock, truncated)

    def export_tabular(self, gamma):
        raise NotExportableError(f"{type(self).__name__} has no tabular export")

    def _reset(self):
        raise NotImplementedError

    def _transition(self, action):
        raise NotImplementedError

    def features_for(self, observation, action):
        raise NotImplementedError


class CrossingState(NamedTuple):
    agent_y: int
    cars: tuple  # (x, y) per car


class CrossingWorld(Environment):
    """Road crossing on a ``width x height`` grid.

    The agent sits in the middle column and starts on the bottom row. Rows
    ``1 .. height - 2`` are lanes; each lane carries ``cars_per_lane`` evenly
    spaced cars that shift one cell every ``period`` steps in the lane's
    direction. Reaching the top row pays ``reward_on_cross`` and sends the
    agent back to the bottom. Being on a car's cell after a step also sends it
    back to the bottom, with no reward. Episodes always last ``T`` steps.

    Actions: 0 = up, 1 = down, 2 = stay.

    Car phases are drawn from the environment's generator on each reset.
    """

    UP, DOWN, STAY = 0, 1, 2

    def __init__(self, width=10, height=10, cars_per_lane=3, periods=None, T=500,
                 reward_on_cross=1.0, random_state=None):
        super().__init__(T, random_state)
        self.width = check_count(width, "width", min_val=2)
        self.height = check_count(height, "height", min_val=3)
        self.cars_per_lane = check_count(cars_per_lane, "cars_per_lane", min_val=0)
        if self.cars_per_lane > self.width - 1:
            raise ValueError("a lane needs at least one free cell")
        n_lanes = self.height - 2
        if periods is None:
            periods = [2] * n_lanes
        if len(periods) != n_lanes:
            raise ValueError(f"need one period per lane ({n_lanes}), got {len(periods)}")
        self.periods = tuple(check_count(p, "period") for p in periods)
        self.reward_on_cross = float(reward_on_cross)
        self.n_actions = 3
        self.agent_x = self.width // 2
        self.grid = GridFeatureSpec(self.width, self.height, 2, self.n_actions)
        self.feature_dim = self.grid.total
        # Cars never share a cell and the agent is never left on a car, so
        # the active count is constant.
        self.feature_norm = 1 + n_lanes * self.cars_per_lane
        self._lane_y = np.arange(1, self.height - 1)
        self._direction = np.where(self._lane_y % 2 == 0, 1, -1)
        self._spacing = np.arange(self.cars_per_lane) * (self.width // max(self.cars_per_lane, 1))
        self._periods = np.asarray(self.periods)
        self._car_y = np.repeat(self._lane_y, self.cars_per_lane).tolist()
        self._cached_obs = None

    def _car_positions(self):
        shift = self._direction * (self._t // self._periods)
        xs = (self._phase[:, None] + self._spacing[None, :] + shift[:, None]) % self.width
        return tuple(zip(xs.ravel().tolist(), self._car_y))

    def _reset(self):
        self._t = 0
        self._phase = self._rng.integers(0, self.width, size=self.height - 2)
        self._agent_y = self.height - 1
        return CrossingState(self._agent_y, self._car_positions())

    def _transition(self, action):
        y = self._agent_y
        if action == self.UP:
            y -= 1
        elif action == self.DOWN:
            y = min(y + 1, self.height - 1)
        self._t += 1
        cars = self._car_positions()
        reward = 0.0
        if y == 0:
            reward = self.reward_on_cross
            y = self.height - 1
        elif (self.agent_x, y) in cars:
            y = self.height - 1
        self._agent_y = y
        return CrossingState(y, cars), reward, False

    def _block_indices(self, observation):
        if observation is not self._cached_obs:
            cells = [((observation.agent_y * self.width + self.agent_x) * 2)]
            cells.extend((y * self.width + x) * 2 + 1 for x, y in observation.cars)
            self._cached_obs = observation
            self._cached_base = np.array(sorted(cells), dtype=np.int64)
        return self._cached_base

    def features_for(self, observation, action):
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range [0, {self.n_actions})")
        base = self._block_indices(observation)
        return SparseBinaryFeatures.from_sorted(self.feature_dim,
                                                base + action * self.grid.block_size)


class CorridorState(NamedTuple):
    position: int
    collected: tuple  # pickup cells already consumed this episode


class CorridorWorld(Environment):
    """One-dimensional corridor from cell 0 to a terminal goal at ``length - 1``.

    Moving into a pickup cell pays ``mid_reward`` once per episode; moving
    into a hazard cell pays ``hazard_reward`` every time; moving into the goal
    pays ``goal_reward`` and ends the episode. Actions: 0 = left, 1 = right.
    Bumping into the left wall leaves the agent in place with no reward.
    """

    LEFT, RIGHT = 0, 1

    def __init__(self, length=60, mid_cells=(20, 40), mid_reward=100.0,
                 hazard_cells=(10, 30, 50), hazard_reward=-25.0, goal_reward=1000.0,
                 T=300, random_state=None):
        super().__init__(T, random_state)
        self.length = check_count(length, "length", min_val=2)
        self.mid_cells = tuple(int(c) for c in mid_cells)
        self.hazard_cells = tuple(int(c) for c in hazard_cells)
        special = self.mid_cells + self.hazard_cells
        if len(set(special)) != len(special):
            raise ValueError("pickup and hazard cells must be distinct")
        if any(not 0 < c < self.length - 1 for c in special):
            raise ValueError("pickup and hazard cells must lie strictly inside the corridor")
        self.mid_reward = float(mid_reward)
        self.hazard_reward = float(hazard_reward)
        self.goal_reward = float(goal_reward)
        self.n_actions = 2
        self.feature_dim = self.length * self.n_actions
        self.feature_norm = 1

    def _reset(self):
        return CorridorState(0, ())

    def _move(self, state, action):
        pos, collected = state
        new = pos + 1 if action == self.RIGHT else max(pos - 1, 0)
        if new == pos:
            return state, 0.0, False
        if new == self.length - 1:
            return CorridorState(new, collected), self.goal_reward, True
        if new in self.hazard_cells:
            return CorridorState(new, collected), self.hazard_reward, False
        if new in self.mid_cells and new not in collected:
            return CorridorState(new, tuple(sorted(collected + (new,)))), self.mid_reward, False
        return CorridorState(new, collected), 0.0, False

    def _transition(self, action):
        return self._move(self._obs, action)

    def features_for(self, observation, action):
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range [0, {self.n_actions})")
        return SparseBinaryFeatures.from_sorted(
            self.feature_dim, np.array([action * self.length + observation.position]))

    def state_index(self, state):
        mask = sum(1 << i for i, c in enumerate(self.mid_cells) if c in state.collected)
        return state.position * (1 << len(self.mid_cells)) + mask

    def export_tabular(self, gamma):
        """Exact MDP over ``(position, collected pickups)``; goal states are terminal."""
        n_masks = 1 << len(self.mid_cells)
        n_states = self.length * n_masks
        P = np.zeros((n_states, self.n_actions, n_states))
        R = np.zeros_like(P)
        terminals = []
        for pos in range(self.length):
            for mask in range(n_masks):
                collected = tuple(c for i, c in enumerate(self.mid_cells) if mask >> i & 1)
                state = CorridorState(pos, collected)
                s = self.state_index(state)
                if pos == self.length - 1:
                    P[s, :, s] = 1.0
                    terminals.append(s)
                    continue
                for a in range(self.n_actions):
                    nxt, reward, _ = self._move(state, a)
                    s2 = self.state_index(nxt)
                    P[s, a, s2] = 1.0
                    R[s, a, s2] = reward
        return TabularMDP(P, R, gamma, tuple(terminals))


class TabularEnv(Environment):
    """Simulator for a :class:`TabularMDP` with one-hot ``(state, action)`` features.

    Rewards are the MDP's expected rewards for the sampled transition.
    Reaching a terminal state ends the episode.
    """

    def __init__(self, mdp, start_state=0, T=1000, random_state=None):
        super().__init__(T, random_state)
        self.mdp = mdp
        if not 0 <= start_state < mdp.n_states:
            raise ValueError("start_state out of range")
        self.start_state = int(start_state)
        self.n_actions = mdp.n_actions
        self.feature_dim = mdp.n_states * mdp.n_actions
        self.feature_norm = 1
        self._terminal = frozenset(mdp.terminal_states)
        self._cdf = np.cumsum(mdp.transition, axis=2)

    def _reset(self):
        return self.start_state

    def _transition(self, action):
        s = self._obs
        row = self._cdf[s, action]
        s2 = int(min(np.searchsorted(row, self._rng.random(), side="right"), row.size - 1))
        return s2, self.mdp.reward[s, action, s2], s2 in self._terminal

    def features_for(self, observation, action):
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range [0, {self.n_actions})")
        return SparseBinaryFeatures.from_sorted(
            self.feature_dim, np.array([action * self.mdp.n_states + observation]))

    def export_tabular(self, gamma=None):
        if gamma is None or gamma == self.mdp.gamma:
            return self.mdp
        return TabularMDP(self.mdp.transition, self.mdp.reward, gamma, self.mdp.terminal_states)


def chain_env(n_states=5, gamma=0.9, T=1000, random_state=None):
    """Deterministic chain fixture (see :func:`optinit.mdp.chain_mdp`) starting at state 0."""
    return TabularEnv(chain_mdp(n_states, gamma), 0, T, random_state)


ENVIRONMENTS = {
    "crossing": CrossingWorld,
    "corridor": CorridorWorld,
    "chain": chain_env,
}


def make_env(env_id, random_state=None, **params):
    try:
        factory = ENVIRONMENTS[env_id]
    except KeyError:
        raise ValueError(f"unknown environment {env_id!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return factory(random_state=random_state, **params)
