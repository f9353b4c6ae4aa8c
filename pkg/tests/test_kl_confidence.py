import math

import pytest
import numpy as np

from gpi_bench.src.core.kl_confidence import (
    ExplorationHistory,
    KLInputError,
    beta_cnt,
    beta_p,
    empirical_kernel,
    kl_categorical,
    kl_max_linear,
    kl_max_linear_batch,
    kl_min_linear,
    update_history,
)
from gpi_bench.src.core.mdp import Policy, Trajectory, sample_episode
from gpi_bench.src.core.verification import grid_kl_max


def test_beta_p_values():
    expected = math.log(2 * 4 * 2 * 8 / 0.1) + 3 * (1 + math.log1p(10 / 3))
    assert beta_p(10, 0.1, 4, 2, 8) == pytest.approx(expected)
    assert beta_p(0, 0.1, 4, 2, 8) == pytest.approx(math.log(1280) + 3)
    assert beta_cnt(0.1, 4, 2, 8) == pytest.approx(math.log(1280))


def test_beta_p_vectorized_and_increasing():
    values = beta_p(np.arange(5), 0.05, 3, 2, 4)
    assert values.shape == (5,)
    assert np.all(np.diff(values) > 0)


def test_beta_p_rejects_single_state():
    with pytest.raises(KLInputError):
        beta_p(1, 0.1, 1, 2, 3)


def test_kl_categorical():
    assert kl_categorical([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_categorical([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    assert kl_categorical([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_zero_radius_returns_empirical_mean():
    p = np.array([0.2, 0.3, 0.5])
    v = np.array([1.0, 0.0, 2.0])
    solution = kl_max_linear(p, v, 0.0)
    assert solution.value == pytest.approx(p @ v)
    np.testing.assert_allclose(solution.q, p)


def test_infinite_radius_saturates():
    solution = kl_max_linear(np.array([0.5, 0.5, 0.0]), np.array([0.1, 0.4, 0.9]), math.inf)
    assert solution.value == pytest.approx(0.9)
    assert solution.saturated


def test_constant_values_are_flat():
    solution = kl_max_linear(np.array([0.3, 0.7]), np.array([2.0, 2.0]), 0.2)
    assert solution.value == pytest.approx(2.0)


@pytest.mark.parametrize("p, v, eps", [
    ([0.5, 0.5], [0.0, 1.0], 0.1),
    ([0.9, 0.1], [0.0, 1.0], 0.05),
    ([0.2, 0.5, 0.3], [0.3, 0.9, 0.1], 0.02),
    ([0.5, 0.5, 0.0], [0.1, 0.3, 1.0], 0.3),
    ([1.0, 0.0, 0.0], [0.0, 0.5, 1.0], 0.01),
])
def test_solution_is_feasible_and_matches_grid(p, v, eps):
    p, v = np.array(p), np.array(v)
    solution = kl_max_linear(p, v, eps)
    assert kl_categorical(p, solution.q) <= eps + 1e-8
    assert solution.q.sum() == pytest.approx(1.0)
    assert solution.value == pytest.approx(solution.q @ v, abs=1e-9)
    assert abs(solution.value - grid_kl_max(p, v, eps)) <= 1e-4


def test_mass_moves_outside_support():
    p = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])
    eps = 0.1
    solution = kl_max_linear(p, v, eps)
    # KL((1,0), (1-x, x)) = -log(1-x) <= eps  =>  x <= 1 - exp(-eps)
    assert solution.value == pytest.approx(1 - math.exp(-eps), abs=1e-8)


def test_min_is_negated_max():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = rng.dirichlet(np.ones(4))
        v = rng.random(4)
        eps = rng.uniform(0.01, 0.4)
        assert kl_min_linear(p, v, eps).value == pytest.approx(-kl_max_linear(p, -v, eps).value)
        assert kl_min_linear(p, v, eps).value <= p @ v <= kl_max_linear(p, v, eps).value


def test_batch_matches_single_rows():
    rng = np.random.default_rng(11)
    p = rng.dirichlet(np.ones(3), size=6)
    v = rng.random(3)
    eps = rng.uniform(0.01, 0.3, size=6)
    values, q, _, _, _ = kl_max_linear_batch(p, v, eps)
    for m in range(6):
        assert values[m] == pytest.approx(kl_max_linear(p[m], v, eps[m]).value)
    assert q.shape == (6, 3)


def test_monotone_in_radius():
    p = np.array([0.4, 0.4, 0.2])
    v = np.array([0.0, 0.5, 1.0])
    values = [kl_max_linear(p, v, eps).value for eps in (0.0, 0.01, 0.1, 0.5, 2.0)]
    assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))
    assert values[-1] <= 1.0 + 1e-12


def test_solver_input_errors():
    with pytest.raises(KLInputError):
        kl_max_linear(np.array([0.5, 0.5]), np.array([0.0, 1.0]), -0.1)
    with pytest.raises(KLInputError):
        kl_max_linear(np.array([0.5, 0.5]), np.array([0.0, np.nan]), 0.1)
    with pytest.raises(KLInputError):
        kl_max_linear(np.array([0.5, 0.6]), np.array([0.0, 1.0]), 0.1)


def test_history_record_counts():
    history = ExplorationHistory.empty(S=2, A=2, H=3)
    traj = Trajectory(states=(0, 1, 1), actions=(1, 0, 1), total_reward=0.0)
    update_history(history, traj)
    assert history.t == 1
    assert history.initial_counts.tolist() == [1, 0]
    assert history.counts[0, 0, 1] == 1
    assert history.transition_counts[0, 0, 1, 1] == 1
    assert history.transition_counts[1, 1, 0, 1] == 1
    assert history.invariant_violations() == []


def test_history_rejects_wrong_length():
    history = ExplorationHistory.empty(S=2, A=1, H=3)
    with pytest.raises(KLInputError):
        history.record(Trajectory(states=(0,), actions=(0,), total_reward=0.0))


def test_history_invariants_after_sampling(chain_mdp, rng):
    history = ExplorationHistory.empty(chain_mdp.S, chain_mdp.A, chain_mdp.H)
    policy = Policy.constant(chain_mdp.H, chain_mdp.S, 1)
    for _ in range(50):
        history.record(sample_episode(chain_mdp, policy, rng))
    assert history.t == 50
    assert history.invariant_violations() == []
    snap = history.snapshot()
    assert snap.same_as(history)
    history.record(sample_episode(chain_mdp, policy, rng))
    assert not snap.same_as(history)


def test_from_counts_requires_consistent_rows():
    counts = np.zeros((2, 2, 1), dtype=int)
    counts[0, 0, 0] = 3
    transitions = np.zeros((1, 2, 1, 2), dtype=int)
    transitions[0, 0, 0] = [1, 1]
    with pytest.raises(KLInputError):
        ExplorationHistory.from_counts(counts, transitions, np.array([3, 0]))
    transitions[0, 0, 0] = [1, 2]
    history = ExplorationHistory.from_counts(counts, transitions, np.array([3, 0]))
    assert history.t == 3


def test_empirical_kernel_defaults_to_uniform():
    history = ExplorationHistory.empty(S=3, A=1, H=2)
    kernel = empirical_kernel(history)
    np.testing.assert_allclose(kernel.rows, 1 / 3)
    np.testing.assert_allclose(kernel.initial, 1 / 3)
    history.record(Trajectory(states=(2, 0), actions=(0, 0), total_reward=0.0))
    kernel = empirical_kernel(history)
    np.testing.assert_allclose(kernel.rows[0, 2, 0], [1.0, 0.0, 0.0])
    np.testing.assert_allclose(kernel.rows[0, 0, 0], 1 / 3)
    np.testing.assert_allclose(kernel.initial, [0.0, 0.0, 1.0])
