import pytest
import numpy as np

from gpi_bench.src.core.mdp import (
    Environment,
    MDPValidationError,
    Policy,
    TabularMDP,
    enumerate_policies,
    evaluate_policy,
    optimal_value_and_policy,
    sample_episode,
    sample_returns,
)


def test_mdp_rejects_bad_rows():
    """Transition rows must be probability vectors"""
    transitions = np.full((2, 2, 1, 2), 0.5)
    transitions[0, 0, 0] = [0.7, 0.7]
    with pytest.raises(MDPValidationError):
        TabularMDP(S=2, A=1, H=2, rewards=np.zeros((2, 2, 1)), transitions=transitions,
                   initial_dist=[0.5, 0.5])


def test_mdp_rejects_out_of_range_rewards():
    with pytest.raises(MDPValidationError):
        TabularMDP(S=1, A=1, H=1, rewards=[[[1.5]]], transitions=[[[[1.0]]]], initial_dist=[1.0])


def test_mdp_rejects_shape_mismatch():
    with pytest.raises(MDPValidationError):
        TabularMDP(S=2, A=1, H=2, rewards=np.zeros((2, 2, 1)), transitions=np.full((2, 2, 1, 2), 0.5),
                   initial_dist=[1.0])


def test_mdp_arrays_are_read_only(single_path_mdp):
    with pytest.raises(ValueError):
        single_path_mdp.rewards[0, 0, 0] = 0.0


def test_single_path_value(single_path_mdp):
    value, policy = optimal_value_and_policy(single_path_mdp)
    assert value == pytest.approx(5.0)
    assert evaluate_policy(single_path_mdp, policy) == pytest.approx(5.0)


def test_optimal_policy_two_actions(two_action_mdp):
    value, policy = optimal_value_and_policy(two_action_mdp)
    assert np.all(policy.actions == 1)
    assert value == pytest.approx(evaluate_policy(two_action_mdp, policy))
    worse = evaluate_policy(two_action_mdp, Policy.constant(3, 2, 0))
    assert worse < value


def test_ties_break_to_lowest_action(zero_mdp):
    _, policy = optimal_value_and_policy(zero_mdp)
    assert np.all(policy.actions == 0)


def test_optimal_matches_exhaustive_search(two_action_mdp):
    value, _ = optimal_value_and_policy(two_action_mdp)
    brute = max(evaluate_policy(two_action_mdp, pi) for pi in enumerate_policies(two_action_mdp))
    assert value == pytest.approx(brute, abs=1e-12)


def test_enumerate_refuses_large_spaces(chain_mdp):
    with pytest.raises(MDPValidationError):
        next(enumerate_policies(chain_mdp))


def test_policy_validation(two_action_mdp):
    with pytest.raises(MDPValidationError):
        Policy.constant(3, 2, 2).validate(two_action_mdp)
    with pytest.raises(MDPValidationError):
        Policy.constant(4, 2, 0).validate(two_action_mdp)
    with pytest.raises(MDPValidationError):
        Policy(np.zeros(3))


def test_policy_equality_and_hash():
    a = Policy.constant(2, 3, 1)
    b = Policy(np.ones((2, 3), dtype=int))
    assert a == b
    assert len({a, b}) == 1


def test_sample_episode_shape_and_reward(single_path_mdp, rng):
    policy = Policy.constant(5, 2, 0)
    traj = sample_episode(single_path_mdp, policy, rng)
    assert traj.states == (0, 0, 0, 0, 0)
    assert traj.actions == (0, 0, 0, 0, 0)
    assert traj.total_reward == 5.0


def test_sample_episode_deterministic_per_seed(chain_mdp):
    _, policy = optimal_value_and_policy(chain_mdp)
    a = sample_episode(chain_mdp, policy, np.random.default_rng(3))
    b = sample_episode(chain_mdp, policy, np.random.default_rng(3))
    assert a == b


def test_sample_returns_never_uses_zero_probability_states(single_path_mdp, rng):
    returns = sample_returns(single_path_mdp, Policy.constant(5, 2, 0), 1000, rng)
    assert np.all(returns == 5.0)


def test_sample_returns_matches_dynamic_programming(chain_mdp):
    value, policy = optimal_value_and_policy(chain_mdp)
    returns = sample_returns(chain_mdp, policy, 20_000, np.random.default_rng(0))
    se = returns.std(ddof=1) / np.sqrt(len(returns))
    assert abs(returns.mean() - value) < 3 * se


def test_environment_hides_kernels(chain_mdp, rng):
    env = Environment(chain_mdp)
    known = env.known()
    assert (known.S, known.A, known.H) == (4, 2, 8)
    assert not hasattr(env, 'transitions')
    assert not hasattr(known, 'transitions')
    assert not hasattr(env, 'ground_truth')
    assert {name for name in dir(env) if not name.startswith('_')} == {'S', 'A', 'H', 'rewards', 'known', 'sample'}
    traj = env.sample(Policy.constant(8, 4, 1), rng)
    assert len(traj.states) == 8


@pytest.mark.slow
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sample_episode_matches_dynamic_programming(chain_mdp, seed):
    """10^5 episodes drawn through the environment path stay within 3 standard errors of the DP value."""
    value, policy = optimal_value_and_policy(chain_mdp)
    rng = np.random.default_rng(seed)
    returns = np.array([sample_episode(chain_mdp, policy, rng).total_reward for _ in range(100_000)])
    se = returns.std(ddof=1) / np.sqrt(len(returns))
    assert abs(returns.mean() - value) < 3 * se
