"""Optimistic initialization for Sarsa(lambda) by reward normalization and shifting."""

from .agent import SarsaAgent
from .envs import CorridorWorld, CrossingWorld, TabularEnv, chain_env, make_env
from .features import (
    GridFeatureSpec,
    SparseBinaryFeatures,
    dot,
    grid_features,
    stack_with_negation,
)
from .harness import ExperimentSpec, RunRecord, run_experiment, sliding_window_curve
from .mdp import (
    ConvergenceError,
    TabularMDP,
    greedy_policy,
    policy_evaluation,
    transform_mdp_rewards,
    value_iteration,
)
from .rewards import EpisodeClock, RewardTransform, termination_reward

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "CorridorWorld",
    "CrossingWorld",
    "EpisodeClock",
    "ExperimentSpec",
    "GridFeatureSpec",
    "RewardTransform",
    "RunRecord",
    "SarsaAgent",
    "SparseBinaryFeatures",
    "TabularEnv",
    "TabularMDP",
    "chain_env",
    "dot",
    "greedy_policy",
    "grid_features",
    "make_env",
    "policy_evaluation",
    "run_experiment",
    "sliding_window_curve",
    "stack_with_negation",
    "termination_reward",
    "transform_mdp_rewards",
    "value_iteration",
]
