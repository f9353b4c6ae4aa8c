import pytest
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from gpi_bench.src.core.instances import double_chain, single_chain
from gpi_bench.src.core.kl_confidence import ExplorationHistory, kl_max_linear_batch
from gpi_bench.src.core.mdp import Environment, Policy, optimal_value_and_policy, sample_episode, sample_returns
from gpi_bench.src.core.planner import plan_optimistic


def _chain_history(episodes: int) -> ExplorationHistory:
    mdp = single_chain()
    rng = np.random.default_rng(0)
    history = ExplorationHistory.empty(mdp.S, mdp.A, mdp.H)
    for i in range(episodes):
        history.record(sample_episode(mdp, Policy.constant(mdp.H, mdp.S, i % 2), rng))
    return history


@pytest.mark.performance
def test_planning_speed():
    """Optimistic planning on the chain should stay in the millisecond range"""
    history = _chain_history(500)
    known = Environment(single_chain()).known()

    start_time = time.time()
    for _ in range(50):
        plan_optimistic(history, known, 0.01)
    per_plan = (time.time() - start_time) / 50
    assert per_plan < 0.05


@pytest.mark.performance
def test_batch_solver_throughput():
    """Stress test with many KL rows solved at once"""
    rng = np.random.default_rng(1)
    rows = 10_000
    p = rng.dirichlet(np.ones(5), size=rows)
    v = rng.random(5)
    eps = rng.uniform(0.001, 1.0, size=rows)

    start_time = time.time()
    values, q, _, _, _ = kl_max_linear_batch(p, v, eps)
    elapsed = time.time() - start_time
    assert elapsed < 5
    assert np.all(values <= v.max() + 1e-12)
    assert np.all(values >= (p @ v) - 1e-12)


@pytest.mark.performance
def test_monte_carlo_speed():
    mdp = double_chain()
    _, policy = optimal_value_and_policy(mdp)

    start_time = time.time()
    returns = sample_returns(mdp, policy, 100_000, np.random.default_rng(2))
    assert time.time() - start_time < 5
    assert returns.shape == (100_000,)


@pytest.mark.performance
def test_concurrent_planning():
    """Planning from several threads gives the same answer as planning serially"""
    history = _chain_history(200)
    known = Environment(single_chain()).known()
    serial = plan_optimistic(history, known, 0.05).v_bar_root
    with ThreadPoolExecutor(max_workers=4) as executor:
        results = list(executor.map(lambda _: plan_optimistic(history, known, 0.05).v_bar_root, range(8)))
    assert all(r == serial for r in results)
