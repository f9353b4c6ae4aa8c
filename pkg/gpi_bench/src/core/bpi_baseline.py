import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kl_confidence import ExplorationHistory
from .mdp import Environment, Policy
from .planner import plan_optimistic

logger = logging.getLogger(__name__)

DEFAULT_EPISODE_CAP = 2_000_000


@dataclass(frozen=True)
class BpiOutcome:
    policy: Optional[Policy]
    tau: int
    aborted: bool = False
    v_bar_root: float = float('nan')
    v_under_root: float = float('nan')

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be non-negative")


def run_bpi_ucrl(env: Environment, epsilon: float, delta: float, rng: np.random.Generator,
                 episode_cap: int = DEFAULT_EPISODE_CAP) -> BpiOutcome:
    """Optimistic sampling at a fixed delta, stopping once V_bar_0 - V_under_0 <= epsilon.

    The stopping threshold is our reading of the epsilon-optimal BPI-UCRL rule: the same
    KL bonus as the exploration oracle, width compared against epsilon.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")

    known = env.known()
    history = ExplorationHistory.empty(env.S, env.A, env.H)
    while True:
        plan = plan_optimistic(history, known, delta)
        if plan.width <= epsilon:
            logger.info("BPI-UCRL stopped after %d episodes (width %.4f)", history.t, plan.width)
            return BpiOutcome(policy=plan.pi_bar, tau=history.t,
                              v_bar_root=plan.v_bar_root, v_under_root=plan.v_under_root)
        if history.t >= episode_cap:
            logger.warning("BPI-UCRL hit the episode cap %d (width %.4f)", episode_cap, plan.width)
            return BpiOutcome(policy=plan.pi_bar, tau=history.t, aborted=True,
                              v_bar_root=plan.v_bar_root, v_under_root=plan.v_under_root)
        history.record(env.sample(plan.pi_bar, rng))
