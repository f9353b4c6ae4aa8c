import logging
from dataclasses import dataclass

import numpy as np

from .kl_confidence import (
    ExplorationHistory,
    beta_p,
    empirical_kernel,
    kl_max_linear_batch,
    kl_min_linear_batch,
)
from .mdp import KnownModel, Policy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlanningResult:
    """Optimistic tables, the greedy policy, and the pessimistic value of that policy.

    Tables are indexed by 0-based round h; the *_root values belong to the fictitious round 0.
    """
    q_bar: np.ndarray        # (H, S, A)
    v_bar: np.ndarray        # (H, S)
    v_bar_root: float
    pi_bar: Policy
    v_under_pi: np.ndarray   # (H, S)
    v_under_root: float

    @property
    def width(self) -> float:
        return self.v_bar_root - self.v_under_root


@dataclass(frozen=True)
class PessimisticOptimalResult:
    q_under: np.ndarray      # (H, S, A)
    v_under: np.ndarray      # (H, S)
    v_under_root: float


def confidence_radius(n, delta: float, S: int, A: int, H: int) -> np.ndarray:
    """beta_p(n, delta) / n, saturated to +inf where n = 0."""
    n = np.asarray(n, dtype=float)
    radius = np.full(n.shape, np.inf)
    visited = n > 0
    radius[visited] = beta_p(n[visited], delta, S, A, H) / n[visited]
    return radius


def _check_dimensions(history: ExplorationHistory, known: KnownModel) -> None:
    if (history.S, history.A, history.H) != (known.S, known.A, known.H):
        raise ValueError(
            f"history dimensions {(history.S, history.A, history.H)} "
            f"do not match model {(known.S, known.A, known.H)}")


def plan_optimistic(history: ExplorationHistory, known: KnownModel, delta: float) -> PlanningResult:
    """Optimistic backward induction over KL balls, then pessimistic evaluation of the greedy policy."""
    _check_dimensions(history, known)
    S, A, H = known.S, known.A, known.H
    kernel = empirical_kernel(history)
    radius = confidence_radius(history.counts, delta, S, A, H)
    root_radius = confidence_radius(history.t, delta, S, A, H)

    q_bar = np.empty((H, S, A))
    v_bar = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        if h == H - 1:
            q_bar[h] = known.rewards[h]
        else:
            values = kl_max_linear_batch(kernel.rows[h].reshape(S * A, S), v_bar[h + 1], radius[h].ravel())[0]
            q_bar[h] = known.rewards[h] + values.reshape(S, A)
        v_bar[h] = q_bar[h].max(axis=1)

    actions = np.argmax(q_bar, axis=2)
    v_bar_root = float(kl_max_linear_batch(kernel.initial, v_bar[0], root_radius)[0][0])

    states = np.arange(S)
    v_under = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        chosen = actions[h]
        v_under[h] = known.rewards[h, states, chosen]
        if h < H - 1:
            v_under[h] += kl_min_linear_batch(
                kernel.rows[h, states, chosen], v_under[h + 1], radius[h, states, chosen])[0]
    v_under_root = float(kl_min_linear_batch(kernel.initial, v_under[0], root_radius)[0][0])

    return PlanningResult(
        q_bar=q_bar,
        v_bar=v_bar[:H],
        v_bar_root=v_bar_root,
        pi_bar=Policy(actions),
        v_under_pi=v_under[:H],
        v_under_root=v_under_root,
    )


def plan_pessimistic_optimal(history: ExplorationHistory, known: KnownModel,
                             delta: float) -> PessimisticOptimalResult:
    """Diagnostic lower envelope max_a Q_under; not consumed by any stopping rule."""
    _check_dimensions(history, known)
    S, A, H = known.S, known.A, known.H
    kernel = empirical_kernel(history)
    radius = confidence_radius(history.counts, delta, S, A, H)

    q_under = np.empty((H, S, A))
    v_under = np.zeros((H + 1, S))
    for h in range(H - 1, -1, -1):
        if h == H - 1:
            q_under[h] = known.rewards[h]
        else:
            values = kl_min_linear_batch(kernel.rows[h].reshape(S * A, S), v_under[h + 1], radius[h].ravel())[0]
            q_under[h] = known.rewards[h] + values.reshape(S, A)
        v_under[h] = q_under[h].max(axis=1)

    root_radius = confidence_radius(history.t, delta, S, A, H)
    root = float(kl_min_linear_batch(kernel.initial, v_under[0], root_radius)[0][0])
    return PessimisticOptimalResult(q_under=q_under, v_under=v_under[:H], v_under_root=root)


def stop_positive(result: PlanningResult, C: float, mu0: float) -> bool:
    if C <= 1:
        raise ValueError(f"C must exceed 1, got {C}")
    return result.v_under_root - (C - 1) * (result.v_bar_root - result.v_under_root) > mu0


def stop_negative(result: PlanningResult, mu0: float) -> bool:
    return result.v_bar_root < mu0
