import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from optinit.agent import SarsaAgent, feature_norm_for
from optinit.envs import CorridorWorld, CrossingWorld, chain_env
from optinit.features import SparseBinaryFeatures as F
from optinit.rewards import EpisodeClock


def one_hot_actions(q):
    """Features and weights such that action a has value q[a]."""
    n = len(q)
    agent = SarsaAgent(epsilon=0.0, random_state=0).initialize(n)
    agent.weights_[:] = q
    return agent, [F(n, [a]) for a in range(n)]


class TestInitialize:
    def test_zero(self):
        agent = SarsaAgent().initialize(8)
        assert np.all(agent.weights_ == 0) and agent.transform_ is None and agent.traces == {}

    def test_constant_norm(self):
        agent = SarsaAgent(init_strategy="constant_norm_weights", feature_norm=4).initialize(10)
        np.testing.assert_array_equal(agent.weights_, np.full(10, 0.25))
        assert agent.q_value(F(10, [0, 3, 5, 9])) == 1.0

    def test_stacked_on_stacked_features(self):
        agent = SarsaAgent(init_strategy="stacked", feature_norm=5).initialize(10)
        from optinit.features import stack_with_negation
        assert agent.q_value(stack_with_negation(F(5, [2]))) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("strategy,optimism", [("shift_optimistic", "mild"),
                                                   ("shift_optimistic_strong", "strong")])
    def test_shift(self, strategy, optimism):
        agent = SarsaAgent(init_strategy=strategy).initialize(4)
        assert np.all(agent.weights_ == 0)
        assert agent.transform_.optimism == optimism

    @pytest.mark.parametrize("params", [
        {"alpha": 0.0}, {"gamma": 0.0}, {"lam": 1.5}, {"epsilon": -0.1},
        {"trace_kind": "dutch"}, {"init_strategy": "pessimistic"},
        {"init_strategy": "constant_norm_weights"}, {"trace_cutoff": -1.0},
    ])
    def test_invalid(self, params):
        with pytest.raises((ValueError, TypeError)):
            SarsaAgent(**params).initialize(3)

    def test_unfitted(self):
        with pytest.raises(NotFittedError):
            SarsaAgent().q_values([F(2, [0])])


class TestSelectAction:
    def test_greedy(self):
        agent, feats = one_hot_actions([0.1, 0.9, 0.3])
        assert {agent.select_action(feats) for _ in range(50)} == {1}
        assert agent.predict(feats) == 1

    def test_uniform_when_fully_exploring(self):
        agent, feats = one_hot_actions([0.1, 0.9, 0.3])
        agent.set_params(epsilon=1.0)
        counts = np.bincount([agent.select_action(feats) for _ in range(10_000)], minlength=3)
        sigma = np.sqrt(10_000 * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - 10_000 / 3) < 3 * sigma)

    def test_ties_uniform(self):
        agent, feats = one_hot_actions([0.0, 0.0, 0.0])
        counts = np.bincount([agent.select_action(feats) for _ in range(9_000)], minlength=3)
        sigma = np.sqrt(9_000 * (1 / 3) * (2 / 3))
        assert np.all(np.abs(counts - 3_000) < 3 * sigma)

    def test_ties_only_among_maximizers(self):
        agent, feats = one_hot_actions([1.0, 0.0, 1.0])
        assert {agent.select_action(feats) for _ in range(200)} == {0, 2}
        assert agent.predict(feats) == 0

    def test_seeded(self):
        picks = []
        for _ in range(2):
            agent = SarsaAgent(epsilon=0.5, random_state=42).initialize(3)
            picks.append([agent.select_action([F(3, [a]) for a in range(3)]) for _ in range(100)])
        assert picks[0] == picks[1]

    def test_empty(self):
        agent = SarsaAgent().initialize(2)
        with pytest.raises(ValueError):
            agent.select_action([])


class TestStepUpdate:
    def test_first_reward(self):
        agent = SarsaAgent(alpha=0.1, gamma=0.9, lam=0.0).initialize(4)
        delta = agent.step_update(F(4, [0, 2]), 1.0, F(4, [1]), EpisodeClock(1, 10))
        assert delta == 1.0
        np.testing.assert_array_equal(agent.weights_, [0.1, 0, 0.1, 0])

    def test_shifted_zero_reward(self):
        agent = SarsaAgent(alpha=0.5, gamma=0.99, lam=0.0,
                           init_strategy="shift_optimistic").initialize(3)
        delta = agent.step_update(F(3, [1]), 0.0, F(3, [2]), EpisodeClock(1, 10))
        assert delta == pytest.approx(-0.01, abs=1e-15)
        assert agent.weights_[1] == pytest.approx(-0.005, abs=1e-15)

    def test_terminal_bootstrap_for_shift_agents(self):
        gamma, T, k = 0.9, 10, 4
        agent = SarsaAgent(alpha=1.0, gamma=gamma, lam=0.0,
                           init_strategy="shift_optimistic").initialize(2)
        delta = agent.step_update(F(2, [0]), 0.0, None, EpisodeClock(k, T))
        expected = (gamma - 1) + gamma * (gamma ** (T - k + 1) - 1)
        assert delta == pytest.approx(expected, abs=1e-15)
        assert agent.traces == {}

    def test_terminal_bootstrap_zero_otherwise(self):
        agent = SarsaAgent(alpha=1.0, gamma=0.9).initialize(2)
        assert agent.step_update(F(2, [0]), 2.0, None, EpisodeClock(3, 10)) == 2.0

    def test_trace_decay_and_credit(self):
        # Two steps with lam=1, gamma=0.5: the second TD error also credits the
        # first feature with weight gamma*lam.
        agent = SarsaAgent(alpha=1.0, gamma=0.5, lam=1.0).initialize(3)
        clock = EpisodeClock(1, 10)
        agent.step_update(F(3, [0]), 0.0, F(3, [1]), clock)
        assert agent.traces == {0: 0.5}
        agent.step_update(F(3, [1]), 1.0, F(3, [2]), clock)
        np.testing.assert_allclose(agent.weights_, [0.5, 1.0, 0.0])

    def test_lambda_zero_is_one_step(self):
        agent = SarsaAgent(alpha=1.0, gamma=0.5, lam=0.0).initialize(3)
        clock = EpisodeClock(1, 10)
        agent.step_update(F(3, [0]), 0.0, F(3, [1]), clock)
        assert agent.traces == {}
        agent.step_update(F(3, [1]), 1.0, F(3, [2]), clock)
        np.testing.assert_array_equal(agent.weights_, [0.0, 1.0, 0.0])

    def test_replacing_vs_accumulating(self):
        clock = EpisodeClock(1, 100)
        traces = {}
        for kind in ("replacing", "accumulating"):
            agent = SarsaAgent(alpha=1e-3, gamma=1.0, lam=1.0, trace_kind=kind).initialize(2)
            for _ in range(3):
                agent.step_update(F(2, [0]), 0.0, F(2, [0]), clock)
            traces[kind] = agent.traces[0]
        assert traces["replacing"] == 1.0
        assert traces["accumulating"] == 3.0

    def test_replacing_traces_bounded(self):
        rng = np.random.default_rng(5)
        agent = SarsaAgent(alpha=0.05, gamma=0.99, lam=0.95).initialize(20)
        clock = EpisodeClock(1, 10)
        for _ in range(500):
            phi = F(20, rng.choice(20, size=3, replace=False))
            agent.step_update(phi, float(rng.normal()), F(20, rng.choice(20, size=3, replace=False)), clock)
            assert all(0.0 <= v <= 1.0 for v in agent.traces.values())

    def test_cutoff_prunes(self):
        agent = SarsaAgent(alpha=0.1, gamma=0.1, lam=0.1, trace_cutoff=1e-3).initialize(4)
        clock = EpisodeClock(1, 10)
        agent.step_update(F(4, [0]), 0.0, F(4, [1]), clock)
        assert agent.traces == {0: pytest.approx(0.01)}
        agent.step_update(F(4, [1]), 0.0, F(4, [2]), clock)
        assert set(agent.traces) == {1}

    def test_dimension_mismatch(self):
        agent = SarsaAgent().initialize(3)
        with pytest.raises(ValueError):
            agent.step_update(F(4, [0]), 0.0, None, EpisodeClock(1, 2))


class TestEpisodes:
    def test_chain_learns_to_go_right(self):
        agent = SarsaAgent(alpha=0.2, gamma=0.9, lam=0.5, epsilon=0.1, random_state=0)
        agent.fit(chain_env(random_state=0), n_episodes=200)
        assert len(agent.episode_scores_) == 200
        env = chain_env()
        for s in range(4):
            assert agent.predict([env.features_for(s, a) for a in range(2)]) == 1

    def test_deterministic(self):
        def run():
            agent = SarsaAgent(alpha=0.1, init_strategy="shift_optimistic", random_state=3)
            agent.fit(CorridorWorld(random_state=3), n_episodes=5)
            return agent.weights_.copy(), agent.episode_scores_
        (w1, s1), (w2, s2) = run(), run()
        np.testing.assert_array_equal(w1, w2)
        assert s1 == s2

    def test_warm_start(self):
        env = chain_env(random_state=1)
        agent = SarsaAgent(alpha=0.2, gamma=0.9, random_state=1).fit(env, 3)
        agent.fit(env, 2, warm_start=True)
        assert len(agent.episode_scores_) == 5
        agent.fit(env, 1)
        assert len(agent.episode_scores_) == 1

    def test_stacked_dimension(self):
        env = CrossingWorld(T=20, random_state=0)
        agent = SarsaAgent(init_strategy="stacked", feature_norm=feature_norm_for(env, "stacked"),
                           random_state=0).fit(env, 1)
        assert agent.weights_.size == 2 * env.feature_dim

    def test_raw_scores(self):
        env = CrossingWorld(cars_per_lane=0, T=27, random_state=0)
        agent = SarsaAgent(alpha=0.1, init_strategy="shift_optimistic", epsilon=0.0,
                           random_state=0).initialize(env.feature_dim)
        agent.weights_[: env.grid.block_size] = 1.0   # always prefer "up"
        assert agent.run_episode(env, learn=False) == 3.0

    def test_feature_norm_for(self):
        env = CrossingWorld()
        assert feature_norm_for(env, "constant_norm_weights") == 25
        assert feature_norm_for(env, "stacked") == 600
        assert feature_norm_for(env, "zero") is None


class TestEstimatorApi:
    def test_clone_and_params(self):
        agent = SarsaAgent(alpha=0.3, lam=0.2, init_strategy="shift_optimistic").initialize(3)
        fresh = clone(agent)
        assert fresh.get_params() == agent.get_params()
        assert not hasattr(fresh, "weights_")

    def test_weights_round_trip(self, tmp_path):
        agent = SarsaAgent().initialize(5)
        agent.weights_[:] = np.random.default_rng(0).normal(size=5) / 3
        path = tmp_path / "w.txt"
        agent.save_weights(path)
        loaded = SarsaAgent().load_weights(path)
        np.testing.assert_array_equal(loaded.weights_, agent.weights_)
        with pytest.raises(ValueError):
            SarsaAgent().initialize(4).load_weights(path)
