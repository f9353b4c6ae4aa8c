import pytest
from pathlib import Path
import tempfile
import json

import numpy as np

from gpi_bench.src.core.instances import single_chain, zero_reward_instance
from gpi_bench.src.core.mdp import TabularMDP


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test files"""
    with tempfile.TemporaryDirectory() as tmpdirname:
        yield Path(tmpdirname)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def single_path_mdp():
    """S=2, A=1, H=5: start in state 0, stay there, collect reward 1 every round (V* = 5)."""
    H, S, A = 5, 2, 1
    rewards = np.zeros((H, S, A))
    rewards[:, 0, 0] = 1.0
    transitions = np.zeros((H, S, A, S))
    transitions[:, 0, 0, 0] = 1.0
    transitions[:, 1, 0, 1] = 1.0
    return TabularMDP(S=S, A=A, H=H, rewards=rewards, transitions=transitions,
                      initial_dist=np.array([1.0, 0.0]))


@pytest.fixture
def two_action_mdp():
    """S=2, A=2, H=3 with a unique optimal policy: action 1 leads to the rewarding state 1."""
    H, S, A = 3, 2, 2
    rewards = np.zeros((H, S, A))
    rewards[:, 1, :] = 1.0
    transitions = np.zeros((H, S, A, S))
    transitions[:, :, 0, 0] = 0.8
    transitions[:, :, 0, 1] = 0.2
    transitions[:, :, 1, 0] = 0.3
    transitions[:, :, 1, 1] = 0.7
    return TabularMDP(S=S, A=A, H=H, rewards=rewards, transitions=transitions,
                      initial_dist=np.array([0.5, 0.5]))


@pytest.fixture
def chain_mdp():
    return single_chain()


@pytest.fixture
def zero_mdp():
    return zero_reward_instance(S=2, A=2, H=4)


@pytest.fixture
def experiment_config(temp_dir):
    """Small, fast experiment on the zero-reward instance (every trial declares negative)."""
    config = {
        'instance': {'family': 'zero_reward', 'params': {'S': 2, 'A': 2, 'H': 4}},
        'algorithms': ['bee-gpi'],
        'mu0_grid': [0.5, 1.0],
        'delta': 0.1,
        'trials': 2,
        'base_seed': 7,
        'output_directory': str(temp_dir / 'output'),
        'record_wall_time': False,
    }
    path = temp_dir / 'config.json'
    with open(path, 'w') as f:
        json.dump(config, f, indent=4)
    return path
