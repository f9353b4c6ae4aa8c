"""
Instance families: the noisy chains used in the benchmark, the Uniform and Tree
hard instances, a zero-reward negative fixture, and per-(s, h) action relabelling.

States and actions are 0-based. In the Uniform and Tree families the two special
states s_good and s_bad are the last two indices (S - 2 and S - 1).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .mdp import Policy, TabularMDP

logger = logging.getLogger(__name__)

LEFT = 0
RIGHT = 1
CHAIN_STATES = 4
INTENDED_PROB = 0.9


class InstanceParameterError(ValueError):
    pass


def _chain(H: int, start: int, reward_site: int) -> TabularMDP:
    if H < 1:
        raise InstanceParameterError(f"H must be >= 1, got {H}")
    if not 0 <= reward_site < CHAIN_STATES:
        raise InstanceParameterError(f"reward_site must be a state in [0, {CHAIN_STATES})")
    S, A = CHAIN_STATES, 2
    last = S - 1
    transitions = np.zeros((H, S, A, S))
    for s in range(S):
        down, up = max(s - 1, 0), min(s + 1, last)
        # the reverse move is clamped at the ends of the chain
        transitions[:, s, LEFT, down] += INTENDED_PROB
        transitions[:, s, LEFT, up] += 1 - INTENDED_PROB
        transitions[:, s, RIGHT, up] += INTENDED_PROB
        transitions[:, s, RIGHT, down] += 1 - INTENDED_PROB
    rewards = np.zeros((H, S, A))
    rewards[:, reward_site, :] = 1.0
    initial = np.zeros(S)
    initial[start] = 1.0
    return TabularMDP(S=S, A=A, H=H, rewards=rewards, transitions=transitions, initial_dist=initial)


def single_chain(H: int = 8, reward_site: int = CHAIN_STATES - 1) -> TabularMDP:
    """Four-state noisy chain starting at state 0.

    The reward placement (1 at the far state for every action and round) is a chosen
    convention; pass reward_site to move it.
    """
    return _chain(H, start=0, reward_site=reward_site)


def double_chain(H: int = 8, reward_site: int = CHAIN_STATES - 1) -> TabularMDP:
    """Same dynamics as single_chain, starting at state 1."""
    return _chain(H, start=1, reward_site=reward_site)


def uniform_instance(S: int, A: int, H: int, r: float, eps: float) -> TabularMDP:
    """Alternates between the regular states [0, S-2) and {s_good, s_bad}.

    From a regular state action 0 reaches s_good with probability r + eps, any other
    action with probability r; s_good and s_bad return uniformly to the regular states.
    Optimal value H (r + eps) / 2.
    """
    if H % 2 != 0 or H < 2:
        raise InstanceParameterError(f"H must be a positive even integer, got {H}")
    if S < 3:
        raise InstanceParameterError(f"S must be >= 3, got {S}")
    if A < 2:
        raise InstanceParameterError(f"A must be >= 2, got {A}")
    if not (0.25 < r < r + eps < 0.75):
        raise InstanceParameterError(f"need 1/4 < r < r + eps < 3/4, got r={r}, eps={eps}")

    regular = S - 2
    good, bad = S - 2, S - 1
    transitions = np.zeros((H, S, A, S))
    transitions[:, :regular, :, good] = r
    transitions[:, :regular, 0, good] = r + eps
    transitions[:, :regular, :, bad] = 1.0 - transitions[:, :regular, :, good]
    transitions[:, good:, :, :regular] = 1.0 / regular

    rewards = np.zeros((H, S, A))
    rewards[:, good, :] = 1.0
    initial = np.zeros(S)
    initial[:regular] = 1.0 / regular
    return TabularMDP(S=S, A=A, H=H, rewards=rewards, transitions=transitions, initial_dist=initial)


def tree_depth(S: int) -> int:
    """N such that S = 2^N + 1."""
    N = int(round(math.log2(S - 1))) if S > 1 else 0
    if N < 1 or 2 ** N + 1 != S:
        raise InstanceParameterError(f"S must be 2^N + 1 with N >= 1, got {S}")
    return N


def tree_instance(S: int, A: int, H: int, r: float) -> TabularMDP:
    """Binary tree over nodes 1..2^N - 1 (index node - 1) with absorbing s_good / s_bad.

    Internal nodes: action 0 moves to node 2s, action 1 to node 2s + 1, actions >= 2
    jump to s_good with probability r. Leaves jump with every action. Start at node 1.
    Optimal value (H - 1) r.
    """
    N = tree_depth(S)
    if A < 3:
        raise InstanceParameterError(f"A must be >= 3, got {A}")
    if H - 1 < 6 * N:
        raise InstanceParameterError(f"need H - 1 >= 6 log2(S - 1) = {6 * N}, got H={H}")
    if not 0.375 < r < 0.625:
        raise InstanceParameterError(f"r must lie in (3/8, 5/8), got {r}")

    nodes = 2 ** N - 1
    first_leaf = 2 ** (N - 1)
    good, bad = S - 2, S - 1
    transitions = np.zeros((H, S, A, S))
    for node in range(1, nodes + 1):
        s = node - 1
        jump_actions = slice(2, A) if node < first_leaf else slice(0, A)
        transitions[:, s, jump_actions, good] = r
        transitions[:, s, jump_actions, bad] = 1.0 - r
        if node < first_leaf:
            transitions[:, s, 0, 2 * node - 1] = 1.0
            transitions[:, s, 1, 2 * node] = 1.0
    transitions[:, good, :, good] = 1.0
    transitions[:, bad, :, bad] = 1.0

    rewards = np.zeros((H, S, A))
    rewards[:, good, :] = 1.0
    initial = np.zeros(S)
    initial[0] = 1.0
    return TabularMDP(S=S, A=A, H=H, rewards=rewards, transitions=transitions, initial_dist=initial)


def zero_reward_instance(S: int = 2, A: int = 2, H: int = 4) -> TabularMDP:
    """Uniform kernels and no reward anywhere: every positive threshold is negative."""
    transitions = np.full((H, S, A, S), 1.0 / S)
    return TabularMDP(S=S, A=A, H=H, rewards=np.zeros((H, S, A)),
                      transitions=transitions, initial_dist=np.full(S, 1.0 / S))


@dataclass(frozen=True, eq=False)
class PermutationSet:
    """sigma[h, s] is a permutation of the action indices."""
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=np.int64, copy=True)
        if sigma.ndim != 3:
            raise InstanceParameterError(f"sigma must have shape (H, S, A), got {sigma.shape}")
        A = sigma.shape[2]
        if not np.all(np.sort(sigma, axis=2) == np.arange(A)):
            raise InstanceParameterError("every sigma[h, s] must be a permutation of the actions")
        sigma.flags.writeable = False
        object.__setattr__(self, 'sigma', sigma)

    @classmethod
    def identity(cls, H: int, S: int, A: int) -> 'PermutationSet':
        return cls(np.broadcast_to(np.arange(A), (H, S, A)))

    @classmethod
    def random(cls, H: int, S: int, A: int, rng: np.random.Generator) -> 'PermutationSet':
        return cls(rng.permuted(np.broadcast_to(np.arange(A), (H, S, A)).copy(), axis=2))

    def inverse(self) -> 'PermutationSet':
        return PermutationSet(np.argsort(self.sigma, axis=2))


def permute_instance(mdp: TabularMDP, sigma: PermutationSet) -> TabularMDP:
    """Relabel actions so that action sigma[h, s][a] behaves like the old action a."""
    if sigma.sigma.shape != (mdp.H, mdp.S, mdp.A):
        raise InstanceParameterError(
            f"sigma shape {sigma.sigma.shape} does not match {(mdp.H, mdp.S, mdp.A)}")
    h_idx, s_idx, a_idx = np.indices((mdp.H, mdp.S, mdp.A))
    rewards = np.empty_like(mdp.rewards)
    transitions = np.empty_like(mdp.transitions)
    rewards[h_idx, s_idx, sigma.sigma] = mdp.rewards[h_idx, s_idx, a_idx]
    transitions[h_idx, s_idx, sigma.sigma] = mdp.transitions[h_idx, s_idx, a_idx]
    return TabularMDP(S=mdp.S, A=mdp.A, H=mdp.H, rewards=rewards,
                      transitions=transitions, initial_dist=mdp.initial_dist)


def permute_policy(policy: Policy, sigma: PermutationSet) -> Policy:
    """(sigma o pi)_h(s) = sigma[h, s][pi_h(s)]."""
    H, S = policy.actions.shape
    h_idx, s_idx = np.indices((H, S))
    return Policy(sigma.sigma[h_idx, s_idx, policy.actions])


INSTANCE_FAMILIES: Dict[str, Callable[..., TabularMDP]] = {
    'single_chain': single_chain,
    'double_chain': double_chain,
    'uniform': uniform_instance,
    'tree': tree_instance,
    'zero_reward': zero_reward_instance,
}


def build_instance(family: str, params: Dict) -> TabularMDP:
    try:
        constructor = INSTANCE_FAMILIES[family]
    except KeyError:
        raise InstanceParameterError(
            f"unknown instance family '{family}' (known: {', '.join(sorted(INSTANCE_FAMILIES))})")
    try:
        return constructor(**params)
    except TypeError as e:
        raise InstanceParameterError(f"bad parameters for '{family}': {e}")
