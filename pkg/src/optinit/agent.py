"""Sarsa(lambda) with sparse linear function approximation.

The agent keeps a dense weight vector and a sparse eligibility trace stored
as parallel arrays of indices and values. Four ways of starting out are
supported:

``zero``
    ``theta = 0`` on raw rewards (the usual baseline).
``constant_norm_weights``
    ``theta_i = 1 / |phi|`` so every initial value is 1; needs features whose
    active count never changes.
``stacked``
    Same weights on features stacked with their negation (the caller stacks);
    ``feature_norm`` is then the original dimensionality.
``shift_optimistic`` / ``shift_optimistic_strong``
    ``theta = 0`` on rewards passed through a :class:`RewardTransform`.
"""

import numpy as np
from numpy.random import default_rng
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import (
    check_count,
    check_gamma,
    check_positive,
    check_unit_interval,
)
from .features import dot, stack_with_negation
from .rewards import RewardTransform, termination_reward

INIT_STRATEGIES = ("zero", "constant_norm_weights", "stacked",
                   "shift_optimistic", "shift_optimistic_strong")
TRACE_KINDS = ("replacing", "accumulating")
_SHIFT_MODES = {"shift_optimistic": "mild", "shift_optimistic_strong": "strong"}


class SarsaAgent(BaseEstimator):
    """Epsilon-greedy Sarsa(lambda) over sparse binary features.

    Parameters
    ----------
    alpha : float, default=0.01
        Step size, applied as-is (not divided by the number of active features).
    gamma : float, default=0.99
    lam : float, default=0.9
        Trace decay lambda.
    epsilon : float, default=0.05
    trace_kind : {"replacing", "accumulating"}, default="replacing"
    trace_cutoff : float, default=1e-8
        Trace entries whose magnitude falls below this are dropped.
    init_strategy : str, default="zero"
        One of ``INIT_STRATEGIES``.
    feature_norm : int or None, default=None
        Constant active-feature count; required by ``constant_norm_weights``
        and ``stacked``.
    random_state : int, Generator or None, default=None
        Seed for exploration and tie-breaking.

    Attributes
    ----------
    weights_ : ndarray of shape (n_features,)
    transform_ : RewardTransform or None
        Present for the shift strategies.
    rng_ : numpy.random.Generator
    episode_scores_ : list of float
        Raw (untransformed) return of every episode run by :meth:`fit`.
    """

    def __init__(self, alpha=0.01, gamma=0.99, lam=0.9, epsilon=0.05,
                 trace_kind="replacing", trace_cutoff=1e-8, init_strategy="zero",
                 feature_norm=None, random_state=None):
        self.alpha = alpha
        self.gamma = gamma
        self.lam = lam
        self.epsilon = epsilon
        self.trace_kind = trace_kind
        self.trace_cutoff = trace_cutoff
        self.init_strategy = init_strategy
        self.feature_norm = feature_norm
        self.random_state = random_state

    def _check_params(self):
        check_positive(self.alpha, "alpha")
        check_gamma(self.gamma)
        check_unit_interval(self.lam, "lam")
        check_unit_interval(self.epsilon, "epsilon")
        if self.trace_kind not in TRACE_KINDS:
            raise ValueError(f"trace_kind must be one of {TRACE_KINDS}, got {self.trace_kind!r}")
        if not self.trace_cutoff >= 0:
            raise ValueError("trace_cutoff must be >= 0")
        if self.init_strategy not in INIT_STRATEGIES:
            raise ValueError(f"init_strategy must be one of {INIT_STRATEGIES}, "
                             f"got {self.init_strategy!r}")
        if self.init_strategy in ("constant_norm_weights", "stacked"):
            if self.feature_norm is None:
                raise ValueError(f"init_strategy={self.init_strategy!r} requires feature_norm")
            check_count(self.feature_norm, "feature_norm")

    @property
    def uses_stacked_features(self):
        return self.init_strategy == "stacked"

    def initialize(self, n_features):
        """Allocate weights and traces for ``n_features`` features and reset all state."""
        self._check_params()
        n_features = check_count(n_features, "n_features")
        if self.init_strategy in ("constant_norm_weights", "stacked"):
            self.weights_ = np.full(n_features, 1.0 / self.feature_norm)
        else:
            self.weights_ = np.zeros(n_features)
        if self.init_strategy in _SHIFT_MODES:
            self.transform_ = RewardTransform(gamma=self.gamma,
                                              optimism=_SHIFT_MODES[self.init_strategy])
            self.transform_._check_params()
        else:
            self.transform_ = None
        self.rng_ = default_rng(self.random_state)
        self._trace = None
        self.clear_traces()
        self.episode_scores_ = []
        return self

    def clear_traces(self):
        # Dense storage indexed by the (insertion-ordered) list of live entries,
        # so each update costs O(live entries), never O(n_features).
        n = self.weights_.size
        if getattr(self, "_trace", None) is None or self._trace.size != n:
            self._trace = np.zeros(n)
            self._in_trace = np.zeros(n, dtype=bool)
        else:
            self._trace[self._trace_idx] = 0.0
            self._in_trace[self._trace_idx] = False
        self._trace_idx = np.empty(0, dtype=np.int64)

    @property
    def traces(self):
        """Current eligibility trace as ``{index: value}`` in index order."""
        check_is_fitted(self, "weights_")
        idx = np.sort(self._trace_idx)
        return dict(zip(idx.tolist(), self._trace[idx].tolist()))

    def _check_features(self, f):
        if f.total != self.weights_.size:
            raise ValueError(f"feature dimension {f.total} != weight dimension {self.weights_.size}")

    def q_value(self, f):
        check_is_fitted(self, "weights_")
        self._check_features(f)
        return dot(self.weights_, f)

    def q_values(self, features_per_action):
        check_is_fitted(self, "weights_")
        return self._q_values(features_per_action)

    def _q_values(self, features_per_action):
        w = self.weights_
        for f in features_per_action:
            self._check_features(f)
        return np.array([w[f.active].sum() for f in features_per_action])

    def select_action(self, features_per_action):
        """Epsilon-greedy action; ties among greedy actions are broken uniformly."""
        if not hasattr(self, "weights_"):
            check_is_fitted(self, "weights_")
        n = len(features_per_action)
        if n == 0:
            raise ValueError("need at least one action")
        if self.epsilon > 0 and self.rng_.random() < self.epsilon:
            return int(self.rng_.integers(n))
        q = self._q_values(features_per_action)
        best = np.flatnonzero(q == q.max())
        if best.size == 1:
            return int(best[0])
        return int(best[self.rng_.integers(best.size)])

    def predict(self, features_per_action):
        """Greedy action with lowest-index tie-breaking (no exploration)."""
        return int(np.argmax(self.q_values(features_per_action)))

    def effective_reward(self, raw_reward):
        if self.transform_ is None:
            return float(raw_reward)
        return self.transform_.observe_reward(raw_reward)

    def step_update(self, phi_t, raw_reward, phi_next, clock):
        """One Sarsa(lambda) update; returns the TD error.

        ``phi_next`` is the feature vector of the next state and the action
        already chosen there, or None when the episode ended on this step.
        On termination shift agents bootstrap from the termination value
        ``gamma**(T - k + 1) - 1`` instead of 0, and the traces are cleared.
        """
        if not hasattr(self, "weights_"):
            check_is_fitted(self, "weights_")
        self._check_features(phi_t)
        gamma = self.gamma
        reward = self.effective_reward(raw_reward)
        if phi_next is None:
            next_value = 0.0
            if self.transform_ is not None:
                next_value = termination_reward(clock, gamma)
        else:
            self._check_features(phi_next)
            next_value = self.weights_[phi_next.active].sum()
        delta = reward + gamma * next_value - self.weights_[phi_t.active].sum()

        active = phi_t.active
        fresh = active[~self._in_trace[active]]
        if fresh.size:
            self._in_trace[fresh] = True
            self._trace_idx = np.concatenate([self._trace_idx, fresh])
        if self.trace_kind == "replacing":
            self._trace[active] = 1.0
        else:
            self._trace[active] += 1.0

        idx = self._trace_idx
        self.weights_[idx] += (self.alpha * delta) * self._trace[idx]

        if phi_next is None:
            self.clear_traces()
        else:
            val = self._trace[idx] * (gamma * self.lam)
            drop = np.abs(val) < self.trace_cutoff
            if drop.any():
                val[drop] = 0.0
                self._in_trace[idx[drop]] = False
                self._trace[idx] = val
                self._trace_idx = idx[~drop]
            else:
                self._trace[idx] = val
        return delta

    def _features(self, env, observation):
        feats = [env.features_for(observation, a) for a in range(env.n_actions)]
        if self.uses_stacked_features:
            feats = [stack_with_negation(f) for f in feats]
        return feats

    def run_episode(self, env, learn=True):
        """Play one episode in ``env``; returns the raw (original-scale) return."""
        check_is_fitted(self, "weights_")
        step = env.reset()
        self.clear_traces()
        feats = self._features(env, step.observation)
        action = self.select_action(feats)
        score = 0.0
        while True:
            phi = feats[action]
            step = env.step(action)
            score += step.raw_reward
            if step.terminal:
                if learn:
                    self.step_update(phi, step.raw_reward, None, step.clock)
                return score
            feats = self._features(env, step.observation)
            action = self.select_action(feats)
            if learn:
                self.step_update(phi, step.raw_reward, feats[action], step.clock)

    def fit(self, env, n_episodes=1, warm_start=False):
        """Learn from ``n_episodes`` episodes of ``env``.

        Weights are (re)initialized unless ``warm_start`` is set and the
        agent was already fitted.
        """
        n_episodes = check_count(n_episodes, "n_episodes", min_val=0)
        if not (warm_start and hasattr(self, "weights_")):
            dim = env.feature_dim * (2 if self.uses_stacked_features else 1)
            self.initialize(dim)
        for _ in range(n_episodes):
            self.episode_scores_.append(self.run_episode(env))
        return self

    def save_weights(self, path):
        """Write the weight vector as text, one value per line, at full precision."""
        check_is_fitted(self, "weights_")
        np.savetxt(path, self.weights_, fmt="%.17g")

    def load_weights(self, path):
        weights = np.atleast_1d(np.loadtxt(path, dtype=float))
        if hasattr(self, "weights_") and weights.shape != self.weights_.shape:
            raise ValueError("weight file does not match the agent's dimensionality")
        if not hasattr(self, "weights_"):
            self.initialize(weights.size)
        self.weights_ = weights
        return self


def feature_norm_for(env, init_strategy):
    """The ``feature_norm`` an agent with ``init_strategy`` needs on ``env``."""
    if init_strategy == "stacked":
        return env.feature_dim
    if init_strategy == "constant_norm_weights":
        if env.feature_norm is None:
            raise ValueError(f"{type(env).__name__} features do not have a constant norm")
        return env.feature_norm
    return None
