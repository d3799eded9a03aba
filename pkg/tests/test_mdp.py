import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optinit.mdp import (
    ConvergenceError,
    TabularMDP,
    bellman_residual,
    chain_mdp,
    greedy_policy,
    load_mdp,
    policy_evaluation,
    random_mdp,
    save_mdp,
    transform_mdp_rewards,
    value_iteration,
)

from conftest import direct_q


def single_loop(reward, gamma):
    return TabularMDP(np.ones((1, 1, 1)), np.full((1, 1, 1), reward), gamma)


class TestTabularMDP:
    def test_rows_must_sum_to_one(self):
        P = np.full((2, 1, 2), 0.5)
        P[0, 0] = [0.5, 0.5 + 1e-9]
        with pytest.raises(ValueError, match="sum to 1"):
            TabularMDP(P, np.zeros_like(P), 0.9)

    def test_negative_probability(self):
        P = np.array([[[1.5, -0.5]], [[0.0, 1.0]]])
        with pytest.raises(ValueError, match="nonnegative"):
            TabularMDP(P, np.zeros_like(P), 0.9)

    def test_terminal_must_self_loop_with_zero_reward(self):
        P = np.zeros((2, 1, 2))
        P[:, 0, 1] = 1.0
        R = np.zeros_like(P)
        R[1, 0, 1] = 1.0
        with pytest.raises(ValueError, match="terminal"):
            TabularMDP(P, R, 0.9, (1,))

    @pytest.mark.parametrize("gamma", [0.0, 1.5, -0.1])
    def test_gamma_range(self, gamma):
        with pytest.raises(ValueError):
            single_loop(1.0, gamma)

    def test_tables_are_read_only(self, seed7_mdp):
        with pytest.raises(ValueError):
            seed7_mdp.reward[0, 0, 0] = 1.0

    def test_json_round_trip(self, tmp_path, seed7_mdp):
        path = tmp_path / "mdp.json"
        save_mdp(seed7_mdp, path)
        assert load_mdp(path) == seed7_mdp
        assert chain_mdp() == TabularMDP.from_dict(chain_mdp().to_dict())


class TestPolicyEvaluation:
    def test_geometric_series(self):
        q = policy_evaluation(single_loop(1.0, 0.5), [0])
        assert q[0, 0] == pytest.approx(2.0, abs=1e-10)

    def test_zero_rewards_give_zero(self, seed7_mdp):
        mdp = transform_mdp_rewards(seed7_mdp, 1.0, 0.0)
        mdp = TabularMDP(mdp.transition, np.zeros_like(mdp.reward), 0.9)
        assert np.all(policy_evaluation(mdp, np.zeros(10, dtype=int)) == 0.0)

    def test_matches_direct_linear_solve(self, seed7_mdp):
        policy = np.random.default_rng(7).integers(0, 3, size=10)
        q = policy_evaluation(seed7_mdp, policy, tolerance=1e-10)
        np.testing.assert_allclose(q, direct_q(seed7_mdp, policy), rtol=0, atol=1e-9)

    def test_fixed_point_residual(self, seed7_mdp):
        policy = np.arange(10) % 3
        q = policy_evaluation(seed7_mdp, policy, tolerance=1e-8)
        assert bellman_residual(seed7_mdp, q, policy) <= 1e-8

    def test_episodic_gamma_one(self):
        q = policy_evaluation(chain_mdp(5, gamma=1.0), np.ones(5, dtype=int))
        np.testing.assert_allclose(q[:4, 1], 1.0)

    def test_improper_policy_at_gamma_one_raises(self):
        with pytest.raises(ConvergenceError):
            policy_evaluation(single_loop(1.0, 1.0), [0], max_iter=1000)

    def test_bad_policy_index(self, seed7_mdp):
        with pytest.raises(ValueError):
            policy_evaluation(seed7_mdp, np.full(10, 3))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10**6), bump=st.floats(0.01, 5.0))
    def test_monotone_in_rewards(self, seed, bump):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(4, 2, 0.8, rng)
        policy = rng.integers(0, 2, size=4)
        s, a, s2 = rng.integers(0, 4), rng.integers(0, 2), rng.integers(0, 4)
        R = mdp.reward.copy()
        R[s, a, s2] += bump
        q = policy_evaluation(mdp, policy)
        q_bumped = policy_evaluation(TabularMDP(mdp.transition, R, 0.8), policy)
        assert np.all(q_bumped >= q - 1e-9)


class TestValueIteration:
    def test_one_step_to_goal(self):
        P = np.zeros((2, 2, 2))
        P[0, 0, 0] = P[0, 1, 1] = 1.0
        P[1, :, 1] = 1.0
        R = np.zeros_like(P)
        R[0, 1, 1] = 1.0
        q = value_iteration(TabularMDP(P, R, 0.9, (1,)))
        assert q[0, 1] == pytest.approx(1.0)
        # Staying is worth gamma times the value of going next step.
        assert q[0, 0] == pytest.approx(0.9)

    def test_zero_rewards(self):
        mdp = chain_mdp(goal_reward=0.0)
        assert np.all(value_iteration(mdp) == 0.0)

    def test_optimality_residual_and_stable_policy(self, seed7_mdp):
        q = value_iteration(seed7_mdp, tolerance=1e-10)
        assert bellman_residual(seed7_mdp, q) <= 1e-10
        policy = greedy_policy(q)
        sweep = seed7_mdp.expected_reward + 0.9 * seed7_mdp.transition @ q.max(axis=1)
        np.testing.assert_array_equal(greedy_policy(sweep), policy)

    def test_greedy_policy_achieves_q_star(self, seed7_mdp):
        q_star = value_iteration(seed7_mdp, tolerance=1e-10)
        q_pi = policy_evaluation(seed7_mdp, greedy_policy(q_star), tolerance=1e-10)
        np.testing.assert_allclose(q_pi, q_star, rtol=0, atol=1e-8)

    def test_chain_optimal_values(self):
        q = value_iteration(chain_mdp(5, 0.9))
        np.testing.assert_allclose(q[:4, 1], [0.729, 0.81, 0.9, 1.0])
        np.testing.assert_array_equal(greedy_policy(q)[:4], [1, 1, 1, 1])


class TestGreedyPolicy:
    def test_lowest_index_ties(self):
        np.testing.assert_array_equal(greedy_policy([[1, 2], [3, 3]]), [1, 0])

    def test_random_ties_cover_all_maximizers(self):
        q = np.zeros((1, 3))
        seen = {int(greedy_policy(q, "random", seed)[0]) for seed in range(50)}
        assert seen == {0, 1, 2}

    def test_unknown_rule(self):
        with pytest.raises(ValueError):
            greedy_policy([[0.0]], "first")

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            greedy_policy([[np.nan, 1.0]])

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 10**6), c=st.floats(0.01, 100), d=st.floats(-1e3, 1e3))
    def test_affine_invariance(self, seed, c, d):
        q = np.random.default_rng(seed).integers(-5, 6, size=(6, 4)).astype(float)
        np.testing.assert_array_equal(greedy_policy(q), greedy_policy(c * q + d))


class TestTransformRewards:
    def test_identity(self, seed7_mdp):
        assert transform_mdp_rewards(seed7_mdp, 1.0, 0.0) == seed7_mdp

    def test_arithmetic(self):
        out = transform_mdp_rewards(single_loop(100.0, 0.99), 100.0, 0.99 - 1)
        assert out.reward[0, 0, 0] == pytest.approx(0.99, abs=1e-15)

    def test_terminal_rewards_stay_zero(self):
        out = transform_mdp_rewards(chain_mdp(), 2.0, -0.1)
        assert np.all(out.reward[4] == 0.0)
        assert out.reward[0, 0, 0] == pytest.approx(-0.1)

    def test_scale_must_be_positive(self, seed7_mdp):
        with pytest.raises(ValueError):
            transform_mdp_rewards(seed7_mdp, 0.0, 0.0)

    def test_shift_identity_seed7(self, seed7_mdp):
        policy = np.random.default_rng(0).integers(0, 3, size=10)
        scale = 3.7
        q = direct_q(seed7_mdp, policy)
        q_shift = policy_evaluation(transform_mdp_rewards(seed7_mdp, scale, 0.9 - 1), policy)
        np.testing.assert_allclose(q_shift, q / scale - 1, rtol=0, atol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 10**6), gamma=st.sampled_from([0.5, 0.9, 0.99]),
           scale=st.floats(0.1, 100))
    def test_shift_identity_property(self, seed, gamma, scale):
        rng = np.random.default_rng(seed)
        mdp = random_mdp(5, 2, gamma, rng)
        policy = rng.integers(0, 2, size=5)
        q = policy_evaluation(mdp, policy, 1e-10)
        q_shift = policy_evaluation(transform_mdp_rewards(mdp, scale, gamma - 1), policy, 1e-10)
        np.testing.assert_allclose(q_shift, q / scale - 1, rtol=0, atol=1e-9)
