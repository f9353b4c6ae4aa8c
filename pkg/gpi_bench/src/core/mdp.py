import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

logger = logging.getLogger(__name__)

ROW_TOLERANCE = 1e-12
MAX_ENUMERATED_POLICIES = 1024


class MDPValidationError(ValueError):
    pass


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


def _check_distribution(rows: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(rows)):
        raise MDPValidationError(f"{what} contains non-finite entries")
    if np.any(rows < 0):
        raise MDPValidationError(f"{what} has negative entries")
    sums = rows.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > ROW_TOLERANCE):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise MDPValidationError(f"{what} rows must sum to 1 (worst deviation {worst:.3e})")


@dataclass(frozen=True, eq=False)
class TabularMDP:
    """Episodic tabular MDP with known horizon.

    Arrays are indexed with 0-based rounds: rewards[h, s, a], transitions[h, s, a, s'].
    ``initial_dist`` plays the role of the fictitious round-0 transition.
    """
    S: int
    A: int
    H: int
    rewards: np.ndarray
    transitions: np.ndarray
    initial_dist: np.ndarray

    def __post_init__(self):
        for name in ('S', 'A', 'H'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise MDPValidationError(f"'{name}' must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

        rewards = _frozen(self.rewards, float)
        transitions = _frozen(self.transitions, float)
        initial = _frozen(self.initial_dist, float)

        if rewards.shape != (self.H, self.S, self.A):
            raise MDPValidationError(f"rewards must have shape {(self.H, self.S, self.A)}, got {rewards.shape}")
        if transitions.shape != (self.H, self.S, self.A, self.S):
            raise MDPValidationError(
                f"transitions must have shape {(self.H, self.S, self.A, self.S)}, got {transitions.shape}")
        if initial.shape != (self.S,):
            raise MDPValidationError(f"initial_dist must have shape {(self.S,)}, got {initial.shape}")
        if not np.all(np.isfinite(rewards)) or np.any(rewards < 0) or np.any(rewards > 1):
            raise MDPValidationError("every reward must lie in [0, 1]")
        _check_distribution(transitions, "transitions")
        _check_distribution(initial, "initial_dist")

        object.__setattr__(self, 'rewards', rewards)
        object.__setattr__(self, 'transitions', transitions)
        object.__setattr__(self, 'initial_dist', initial)

    def same_as(self, other: 'TabularMDP') -> bool:
        """Field-by-field equality."""
        return (
            (self.S, self.A, self.H) == (other.S, other.A, other.H)
            and np.array_equal(self.rewards, other.rewards)
            and np.array_equal(self.transitions, other.transitions)
            and np.array_equal(self.initial_dist, other.initial_dist)
        )


@dataclass(frozen=True, eq=False)
class Policy:
    """Deterministic time-indexed policy, actions[h, s]."""
    actions: np.ndarray

    def __post_init__(self):
        actions = np.asarray(self.actions)
        if actions.ndim != 2:
            raise MDPValidationError(f"policy actions must be a (H, S) table, got shape {actions.shape}")
        if actions.size and not np.issubdtype(actions.dtype, np.integer):
            if not np.all(actions == np.floor(actions)):
                raise MDPValidationError("policy actions must be integers")
        object.__setattr__(self, 'actions', _frozen(actions, np.int64))

    @classmethod
    def constant(cls, H: int, S: int, action: int) -> 'Policy':
        return cls(np.full((H, S), action, dtype=np.int64))

    @property
    def H(self) -> int:
        return self.actions.shape[0]

    @property
    def S(self) -> int:
        return self.actions.shape[1]

    def validate(self, mdp: TabularMDP) -> None:
        if self.actions.shape != (mdp.H, mdp.S):
            raise MDPValidationError(
                f"policy shape {self.actions.shape} does not match MDP dimensions {(mdp.H, mdp.S)}")
        if np.any(self.actions < 0) or np.any(self.actions >= mdp.A):
            raise MDPValidationError(f"policy actions must lie in [0, {mdp.A})")

    def __eq__(self, other):
        return isinstance(other, Policy) and np.array_equal(self.actions, other.actions)

    def __hash__(self):
        return hash(self.actions.tobytes())


@dataclass(frozen=True)
class Trajectory:
    states: Tuple[int, ...]
    actions: Tuple[int, ...]
    total_reward: float


@dataclass(frozen=True)
class RewardThresholdProblem:
    mdp: TabularMDP
    mu0: float
    delta: float

    def __post_init__(self):
        if not np.isfinite(self.mu0):
            raise MDPValidationError("mu0 must be finite")
        if not 0.0 < self.delta < 1.0:
            raise MDPValidationError("delta must lie in (0, 1)")


def _policy_backup(mdp: TabularMDP, policy: Policy) -> np.ndarray:
    """V^pi_h(s) for h = 0..H (last row is the terminal zero)."""
    policy.validate(mdp)
    values = np.zeros((mdp.H + 1, mdp.S))
    states = np.arange(mdp.S)
    for h in range(mdp.H - 1, -1, -1):
        chosen = policy.actions[h]
        values[h] = mdp.rewards[h, states, chosen] + mdp.transitions[h, states, chosen] @ values[h + 1]
    return values


def evaluate_policy(mdp: TabularMDP, policy: Policy) -> float:
    """Exact V_0^pi(s_0): backward induction, then averaged over the initial distribution."""
    values = _policy_backup(mdp, policy)
    return float(mdp.initial_dist @ values[0])


def optimal_value_and_policy(mdp: TabularMDP) -> Tuple[float, Policy]:
    """Bellman optimality by backward induction; ties break toward the lowest action index."""
    values = np.zeros(mdp.S)
    actions = np.zeros((mdp.H, mdp.S), dtype=np.int64)
    for h in range(mdp.H - 1, -1, -1):
        q = mdp.rewards[h] + mdp.transitions[h] @ values
        actions[h] = np.argmax(q, axis=1)
        values = q.max(axis=1)
    return float(mdp.initial_dist @ values), Policy(actions)


def sample_episode(mdp: TabularMDP, policy: Policy, rng: np.random.Generator) -> Trajectory:
    policy.validate(mdp)
    state = int(rng.choice(mdp.S, p=mdp.initial_dist))
    states, actions = [], []
    total = 0.0
    for h in range(mdp.H):
        action = int(policy.actions[h, state])
        states.append(state)
        actions.append(action)
        total += float(mdp.rewards[h, state, action])
        if h < mdp.H - 1:
            state = int(rng.choice(mdp.S, p=mdp.transitions[h, state, action]))
    return Trajectory(states=tuple(states), actions=tuple(actions), total_reward=total)


def _draw_successors(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw of one successor per row, never landing on a zero-probability state."""
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(rows.shape[0])
    idx = (u[:, None] >= cdf).sum(axis=1)
    last_positive = rows.shape[1] - 1 - np.argmax(rows[:, ::-1] > 0, axis=1)
    return np.minimum(idx, last_positive)


def sample_returns(mdp: TabularMDP, policy: Policy, n: int, rng: np.random.Generator) -> np.ndarray:
    """Total rewards of n independent episodes, simulated side by side."""
    policy.validate(mdp)
    states = _draw_successors(np.broadcast_to(mdp.initial_dist, (n, mdp.S)), rng)
    totals = np.zeros(n)
    for h in range(mdp.H):
        chosen = policy.actions[h, states]
        totals += mdp.rewards[h, states, chosen]
        if h < mdp.H - 1:
            states = _draw_successors(mdp.transitions[h, states, chosen], rng)
    return totals


def enumerate_policies(mdp: TabularMDP) -> Iterator[Policy]:
    cells = mdp.S * mdp.H
    if mdp.A ** cells > MAX_ENUMERATED_POLICIES:
        raise MDPValidationError(
            f"refusing to enumerate {mdp.A}^{cells} policies (limit {MAX_ENUMERATED_POLICIES})")
    for combo in itertools.product(range(mdp.A), repeat=cells):
        yield Policy(np.array(combo, dtype=np.int64).reshape(mdp.H, mdp.S))


@dataclass(frozen=True)
class KnownModel:
    """The part of an instance the learner may read: dimensions and rewards."""
    S: int
    A: int
    H: int
    rewards: np.ndarray


class Environment:
    """Episode simulator that keeps the true kernels out of reach of the learner."""

    def __init__(self, mdp: TabularMDP):
        self.__mdp = mdp
        self._known = KnownModel(S=mdp.S, A=mdp.A, H=mdp.H, rewards=mdp.rewards)

    @property
    def S(self) -> int:
        return self._known.S

    @property
    def A(self) -> int:
        return self._known.A

    @property
    def H(self) -> int:
        return self._known.H

    @property
    def rewards(self) -> np.ndarray:
        return self._known.rewards

    def known(self) -> KnownModel:
        return self._known

    def sample(self, policy: Policy, rng: np.random.Generator) -> Trajectory:
        return sample_episode(self.__mdp, policy, rng)
