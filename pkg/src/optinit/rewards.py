"""Reward normalization and the optimistic downward shift.

Rewards are divided by the magnitude of the first nonzero reward ever seen
and then shifted by ``gamma - 1``. Under the shifted rewards every action
value is ``q / |r_first| - 1``, so a value function that is identically zero
corresponds to an optimistic estimate of one first-reward in original units.

Episodic tasks pay a termination value ``gamma**(T - k + 1) - 1`` when an
episode ends at step ``k`` of at most ``T``. It is worth exactly as much as
``T - k + 1`` further steps of the shift penalty, so ending early is never
rewarded in itself.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_count, check_gamma

OPTIMISM_MODES = ("mild", "strong")


@dataclass(frozen=True)
class EpisodeClock:
    """Steps elapsed ``k`` in the current episode out of a cap ``T``.

    ``k == 0`` right after a reset; every transition advances it by one.
    """

    k: int
    T: int

    def __post_init__(self):
        check_count(self.T, "T")
        check_count(self.k, "k", min_val=0)
        if self.k > self.T:
            raise ValueError(f"clock step k={self.k} exceeds cap T={self.T}")

    def advance(self):
        if self.k >= self.T:
            raise ValueError(f"clock already at its cap T={self.T}")
        clock = object.__new__(EpisodeClock)
        object.__setattr__(clock, "k", self.k + 1)
        object.__setattr__(clock, "T", self.T)
        return clock

    @property
    def expired(self):
        return self.k >= self.T


def termination_reward(clock, gamma):
    """``gamma**(T - k + 1) - 1`` for an episode ending at step ``k``.

    This is the discounted value, seen from the terminal state, of
    ``T - k + 1`` further rewards of ``gamma - 1``. Learners add it as the
    bootstrap value of the terminal state (discounted by ``gamma`` once more).
    """
    gamma = check_gamma(gamma)
    if not 1 <= clock.k <= clock.T:
        raise ValueError(f"termination at k={clock.k} outside [1, T={clock.T}]")
    return gamma ** (clock.T - clock.k + 1) - 1.0


def discounted_return(rewards, gamma, terminal_value=0.0):
    """``sum_t gamma**t * rewards[t]`` plus ``gamma**len(rewards) * terminal_value``."""
    rewards = np.asarray(rewards, dtype=float)
    discounts = gamma ** np.arange(rewards.size)
    return float(discounts @ rewards) + gamma ** rewards.size * terminal_value


class RewardTransform(TransformerMixin, BaseEstimator):
    """Normalize rewards by the first nonzero reward and shift them by ``gamma - 1``.

    The transform is stateful: the first nonzero reward passed to
    :meth:`observe_reward` (or :meth:`partial_fit`) fixes the scale for the
    rest of its lifetime. Zero rewards seen before that map to ``gamma - 1``
    under any scale, so the shift applies from the very first step.

    Parameters
    ----------
    gamma : float, default=0.99
        Discount factor of the learner the rewards are fed to.
    optimism : {"mild", "strong"}, default="mild"
        ``"mild"`` makes zero values worth one first-reward. ``"strong"``
        additionally divides by ``1 / (1 - gamma)`` so zero values are worth a
        first-reward on every future step, ``|r_first| / (1 - gamma)``.
    shift : bool, default=True
        Apply the ``gamma - 1`` shift. ``False`` gives plain first-reward
        normalization.

    Attributes
    ----------
    first_reward_magnitude_ : float or None
        ``|r_first|``, or None until a nonzero reward is observed.
    """

    def __init__(self, gamma=0.99, optimism="mild", shift=True):
        self.gamma = gamma
        self.optimism = optimism
        self.shift = shift

    def _check_params(self):
        gamma = check_gamma(self.gamma)
        if self.optimism not in OPTIMISM_MODES:
            raise ValueError(f"optimism must be one of {OPTIMISM_MODES}, got {self.optimism!r}")
        if self.optimism == "strong" and gamma == 1.0:
            raise ValueError("strong optimism needs gamma < 1")
        if not hasattr(self, "first_reward_magnitude_"):
            self.first_reward_magnitude_ = None
        return gamma

    @property
    def shift_constant(self):
        return check_gamma(self.gamma) - 1.0 if self.shift else 0.0

    def _scale(self):
        gamma = self._check_params()
        base = self.first_reward_magnitude_ or 1.0
        if self.optimism == "strong":
            return base / (1.0 - gamma)
        return base

    def observe_reward(self, raw):
        """Transform one raw reward, capturing the scale if it is the first nonzero one."""
        self._check_params()
        raw = float(raw)
        if raw != 0.0 and self.first_reward_magnitude_ is None:
            self.first_reward_magnitude_ = abs(raw)
        return raw / self._scale() + self.shift_constant

    def partial_fit(self, rewards, y=None):
        self._check_params()
        if self.first_reward_magnitude_ is None:
            rewards = np.asarray(rewards, dtype=float).ravel()
            nonzero = np.flatnonzero(rewards)
            if nonzero.size:
                self.first_reward_magnitude_ = float(abs(rewards[nonzero[0]]))
        return self

    def fit(self, rewards, y=None):
        self.first_reward_magnitude_ = None
        return self.partial_fit(rewards)

    def transform(self, rewards):
        """Vectorized transform with the current scale; never changes the scale."""
        self._check_params()
        rewards = np.asarray(rewards, dtype=float)
        if self.first_reward_magnitude_ is None and np.any(rewards != 0):
            raise ValueError("nonzero rewards before any scale was captured; "
                             "call partial_fit or observe_reward first")
        return rewards / self._scale() + self.shift_constant

    def implied_initial_value(self):
        """Original-scale value that all-zero weights stand for.

        Falls back to normalized units (1, or ``1 / (1 - gamma)`` in strong
        mode) while no nonzero reward has been seen.
        """
        if not self.shift:
            return 0.0
        return self._scale()

    def reset(self):
        """Forget the captured scale (a fresh transform for a new run)."""
        self.first_reward_magnitude_ = None
        return self
