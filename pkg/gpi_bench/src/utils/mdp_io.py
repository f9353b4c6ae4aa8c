import json
import logging
import os

from gpi_bench.src.core.mdp import MDPValidationError, TabularMDP

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ('S', 'A', 'H', 'rewards', 'transitions', 'initial')


def mdp_to_dict(mdp: TabularMDP) -> dict:
    return {
        'S': mdp.S,
        'A': mdp.A,
        'H': mdp.H,
        'rewards': mdp.rewards.tolist(),
        'transitions': mdp.transitions.tolist(),
        'initial': mdp.initial_dist.tolist(),
    }


def mdp_from_dict(data: dict) -> TabularMDP:
    missing = [name for name in REQUIRED_FIELDS if name not in data]
    if missing:
        raise MDPValidationError(f"MDP file is missing fields: {', '.join(missing)}")
    return TabularMDP(
        S=data['S'],
        A=data['A'],
        H=data['H'],
        rewards=data['rewards'],
        transitions=data['transitions'],
        initial_dist=data['initial'],
    )


def save_mdp(mdp: TabularMDP, path) -> None:
    """Write the MDP as JSON; float repr keeps full double precision."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(mdp_to_dict(mdp), f)
    logger.debug("Saved MDP (S=%d, A=%d, H=%d) to %s", mdp.S, mdp.A, mdp.H, path)


def load_mdp(path) -> TabularMDP:
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise MDPValidationError(f"Invalid JSON in MDP file {path}: {e}")
    logger.debug("Loaded MDP from %s", path)
    return mdp_from_dict(data)
