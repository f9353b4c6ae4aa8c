import pytest
import numpy as np

from gpi_bench.src.core.instances import (
    INTENDED_PROB,
    InstanceParameterError,
    PermutationSet,
    build_instance,
    double_chain,
    permute_instance,
    permute_policy,
    single_chain,
    tree_depth,
    tree_instance,
    uniform_instance,
    zero_reward_instance,
)
from gpi_bench.src.core.mdp import Policy, enumerate_policies, evaluate_policy, optimal_value_and_policy
from gpi_bench.src.core.verification import tree_parameter_grid, uniform_parameter_grid


def test_chain_shapes_and_start():
    single, double = single_chain(), double_chain()
    assert (single.S, single.A, single.H) == (4, 2, 8)
    assert single.initial_dist.tolist() == [1.0, 0.0, 0.0, 0.0]
    assert double.initial_dist.tolist() == [0.0, 1.0, 0.0, 0.0]
    assert single.transitions[0, 1, 1, 2] == pytest.approx(INTENDED_PROB)
    assert single.transitions[0, 1, 1, 0] == pytest.approx(1 - INTENDED_PROB)


def test_chain_ends_clamp():
    mdp = single_chain()
    assert mdp.transitions[0, 0, 0, 0] == pytest.approx(INTENDED_PROB)
    assert mdp.transitions[0, 3, 1, 3] == pytest.approx(INTENDED_PROB)


def test_double_chain_is_closer_to_reward():
    assert optimal_value_and_policy(double_chain())[0] > optimal_value_and_policy(single_chain())[0]


def test_chain_reward_site_parameter():
    mdp = single_chain(reward_site=0)
    assert mdp.rewards[:, 0, :].sum() == 16
    with pytest.raises(InstanceParameterError):
        single_chain(reward_site=4)


@pytest.mark.parametrize("params", uniform_parameter_grid())
def test_uniform_closed_form(params):
    value, _ = optimal_value_and_policy(uniform_instance(**params))
    assert abs(value - params['H'] * (params['r'] + params['eps']) / 2) <= 1e-10


@pytest.mark.parametrize("params", tree_parameter_grid())
def test_tree_closed_form(params):
    value, _ = optimal_value_and_policy(tree_instance(**params))
    assert abs(value - (params['H'] - 1) * params['r']) <= 1e-10


def test_parameter_grids_are_large_enough():
    assert len(uniform_parameter_grid()) >= 20
    assert len(tree_parameter_grid()) >= 20


@pytest.mark.parametrize("kwargs", [
    dict(S=4, A=2, H=3, r=0.3, eps=0.1),    # odd horizon
    dict(S=2, A=2, H=4, r=0.3, eps=0.1),    # too few states
    dict(S=4, A=1, H=4, r=0.3, eps=0.1),    # too few actions
    dict(S=4, A=2, H=4, r=0.2, eps=0.1),    # r too small
    dict(S=4, A=2, H=4, r=0.5, eps=0.3),    # r + eps too large
])
def test_uniform_rejects_bad_parameters(kwargs):
    with pytest.raises(InstanceParameterError):
        uniform_instance(**kwargs)


def test_tree_rejects_bad_parameters():
    with pytest.raises(InstanceParameterError):
        tree_depth(4)
    with pytest.raises(InstanceParameterError):
        tree_instance(S=5, A=2, H=13, r=0.5)
    with pytest.raises(InstanceParameterError):
        tree_instance(S=5, A=3, H=12, r=0.5)
    with pytest.raises(InstanceParameterError):
        tree_instance(S=5, A=3, H=13, r=0.7)


def test_zero_reward_instance():
    mdp = zero_reward_instance()
    assert optimal_value_and_policy(mdp)[0] == 0.0
    assert (mdp.S, mdp.A, mdp.H) == (2, 2, 4)


def test_identity_permutation_is_noop(chain_mdp):
    sigma = PermutationSet.identity(chain_mdp.H, chain_mdp.S, chain_mdp.A)
    assert permute_instance(chain_mdp, sigma).same_as(chain_mdp)


def test_permutation_inverse_round_trip(chain_mdp, rng):
    sigma = PermutationSet.random(chain_mdp.H, chain_mdp.S, chain_mdp.A, rng)
    back = permute_instance(permute_instance(chain_mdp, sigma), sigma.inverse())
    assert back.same_as(chain_mdp)


def test_permutation_preserves_values(chain_mdp, rng):
    sigma = PermutationSet.random(chain_mdp.H, chain_mdp.S, chain_mdp.A, rng)
    permuted = permute_instance(chain_mdp, sigma)
    value, policy = optimal_value_and_policy(chain_mdp)
    assert optimal_value_and_policy(permuted)[0] == pytest.approx(value, abs=1e-12)
    assert evaluate_policy(permuted, permute_policy(policy, sigma)) == pytest.approx(value, abs=1e-12)


def test_permutation_set_validation():
    with pytest.raises(InstanceParameterError):
        PermutationSet(np.zeros((1, 1, 2), dtype=int))


def test_build_instance_registry():
    assert build_instance('single_chain', {'H': 6}).H == 6
    assert build_instance('tree', {'S': 3, 'A': 3, 'H': 7, 'r': 0.5}).S == 3
    with pytest.raises(InstanceParameterError):
        build_instance('lattice', {})
    with pytest.raises(InstanceParameterError):
        build_instance('uniform', {'S': 4})


def test_uniform_reference_value():
    value, _ = optimal_value_and_policy(uniform_instance(S=10, A=4, H=8, r=0.4, eps=0.05))
    assert value == pytest.approx(1.8, abs=1e-10)


def test_chain_left_row_at_start():
    np.testing.assert_allclose(single_chain().transitions[0, 0, 0], [0.9, 0.1, 0.0, 0.0])


def _tree_policy(H, S, path, jump_action=2):
    """Follow the tree actions in path, then jump with jump_action from then on."""
    actions = np.full((H, S), jump_action, dtype=np.int64)
    for h, move in enumerate(path):
        actions[h, :] = move
    return Policy(actions)


def _state_distribution(mdp, policy, h):
    dist = mdp.initial_dist.copy()
    states = np.arange(mdp.S)
    for round_ in range(h):
        dist = dist @ mdp.transitions[round_, states, policy.actions[round_]]
    return dist


@pytest.mark.parametrize("jump_round", [0, 1, 2])
def test_tree_value_depends_on_jump_round(jump_round):
    H, r = 19, 0.5
    mdp = tree_instance(S=9, A=3, H=H, r=r)
    policy = _tree_policy(H, 9, [0] * jump_round)
    assert evaluate_policy(mdp, policy) == pytest.approx((H - 1 - jump_round) * r, abs=1e-12)


def test_tree_reference_values():
    mdp = tree_instance(S=5, A=3, H=13, r=0.5)
    assert evaluate_policy(mdp, _tree_policy(13, 5, [])) == pytest.approx(6.0)
    assert evaluate_policy(mdp, _tree_policy(13, 5, [1])) == pytest.approx(5.5)


def test_tree_nodes_reachable_along_bit_path():
    S, H = 17, 25
    mdp = tree_instance(S=S, A=3, H=H, r=0.5)
    for node in range(1, 2 ** tree_depth(S)):
        depth = node.bit_length() - 1
        path = [int(bit) for bit in bin(node)[3:]]
        dist = _state_distribution(mdp, _tree_policy(H, S, path), depth)
        assert dist[node - 1] == pytest.approx(1.0)


def test_uniform_suboptimal_action_value():
    H, r, eps = 8, 0.4, 0.05
    mdp = uniform_instance(S=10, A=4, H=H, r=r, eps=eps)
    assert evaluate_policy(mdp, Policy.constant(H, 10, 1)) == pytest.approx(H * r / 2, abs=1e-12)


def test_uniform_policy_values_are_bracketed():
    H, r, eps = 2, 0.3, 0.2
    mdp = uniform_instance(S=4, A=2, H=H, r=r, eps=eps)
    values = [evaluate_policy(mdp, policy) for policy in enumerate_policies(mdp)]
    assert min(values) == pytest.approx(H * r / 2, abs=1e-12)
    assert max(values) == pytest.approx(H * (r + eps) / 2, abs=1e-12)


def test_swapped_uniform_prefers_second_action():
    S, A, H, r, eps = 6, 3, 6, 0.4, 0.1
    mdp = uniform_instance(S=S, A=A, H=H, r=r, eps=eps)
    sigma = np.tile(np.array([1, 0, 2]), (H, S, 1))
    value, policy = optimal_value_and_policy(permute_instance(mdp, PermutationSet(sigma)))
    assert value == pytest.approx(H * (r + eps) / 2, abs=1e-10)
    # decisions only matter on the regular states, visited at even rounds
    assert np.all(policy.actions[::2, :S - 2] == 1)


def test_permutation_preserves_policy_value_multiset(rng):
    mdp = uniform_instance(S=4, A=2, H=2, r=0.3, eps=0.2)
    permuted = permute_instance(mdp, PermutationSet.random(mdp.H, mdp.S, mdp.A, rng))
    original = sorted(evaluate_policy(mdp, p) for p in enumerate_policies(mdp))
    relabeled = sorted(evaluate_policy(permuted, p) for p in enumerate_policies(permuted))
    np.testing.assert_allclose(original, relabeled, atol=1e-12)
