"""
Phased good-policy identification: an early-stopping optimistic exploration oracle
followed, whenever it proposes a policy, by a Monte-Carlo verification stage.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .kl_confidence import ExplorationHistory
from .mdp import Environment, Policy
from .planner import PlanningResult, plan_optimistic, stop_negative, stop_positive

logger = logging.getLogger(__name__)

DEFAULT_PHASE_CAP = 40
LCB_VARIANCE_FACTORS = (1, 4)


@dataclass(frozen=True)
class PhaseSchedule:
    """eps_k = 2^-k, delta_k = 3^-k, alpha_k = 5^k (kept as log alpha_k), C > 1."""
    C: float = 1.01
    eps_base: float = 2.0
    delta_base: float = 3.0
    alpha_base: float = 5.0

    def __post_init__(self):
        if self.C <= 1:
            raise ValueError(f"C must exceed 1, got {self.C}")

    def eps(self, k: int) -> float:
        return self.eps_base ** (-k)

    def delta(self, k: int) -> float:
        return self.delta_base ** (-k)

    def log_alpha(self, k: int) -> float:
        return k * math.log(self.alpha_base)


def exploration_budget(k: int, S: int, A: int, H: int, schedule: PhaseSchedule = PhaseSchedule()) -> int:
    """Cumulative exploration episode budget T_k^ee, ceiled."""
    if k < 1:
        raise ValueError(f"phase index must be >= 1, got {k}")
    eps_k = schedule.eps(k)
    log_term = math.log(2 * S * A * H) - math.log(schedule.delta(k))
    first = (H + 1) ** 2 * S * A * log_term / eps_k
    scale = (H + 1) ** 2 * S ** 2 * A
    second = scale / eps_k * math.log(scale * log_term / eps_k)
    return math.ceil(first + second)


def exploitation_budget(k: int, H: int, schedule: PhaseSchedule, delta: float) -> int:
    """T_k^et, ceiled; the verification loop draws at most T_k^et - 1 episodes."""
    if k < 1:
        raise ValueError(f"phase index must be >= 1, got {k}")
    eps_k = schedule.eps(k)
    inner = math.log(24 * H ** 2 / eps_k)
    value = 100.0 * (schedule.log_alpha(k) - math.log(delta) + math.log(inner)) / eps_k
    return math.ceil(value)


def exploitation_lcb(mean: float, N: int, k: int, H: int, delta: float,
                     schedule: PhaseSchedule = PhaseSchedule(), variance_factor: float = 1.0) -> float:
    """mean - sqrt(f H^2 log(2 alpha_k (log2 2N)^2 / delta) / N)."""
    log_term = (math.log(2.0) + schedule.log_alpha(k)
                + 2.0 * math.log(math.log2(2 * N)) - math.log(delta))
    return mean - math.sqrt(variance_factor * H ** 2 * log_term / N)


class OracleVerdict(Enum):
    POLICY_FOUND = 'policy_found'
    NONE_FOUND = 'none_found'
    NOT_COMPLETED = 'not_completed'


@dataclass(frozen=True)
class OracleOutput:
    verdict: OracleVerdict
    episodes_used: int
    final_v_bar_root: float
    final_v_under_root: float
    policy: Optional[Policy] = None


@dataclass(frozen=True)
class ExploitationResult:
    accepted: bool
    N: int
    rewards: Tuple[float, ...]


class GpiVerdict(Enum):
    QUALIFIED = 'qualified'
    DECLARED_NEGATIVE = 'negative'
    ABORTED = 'aborted'


@dataclass
class PhaseRecord:
    k: int
    oracle_verdict: OracleVerdict
    exploration_episodes: int
    history_size: int
    exploration_budget: int
    v_bar_root: float
    v_under_root: float
    exploitation_episodes: int = 0
    exploitation_budget: Optional[int] = None
    accepted: bool = False


@dataclass
class GpiOutcome:
    verdict: GpiVerdict
    tau: int
    phases: List[PhaseRecord] = field(default_factory=list)
    policy: Optional[Policy] = None
    exploitation_history: List[float] = field(default_factory=list)


def es_bpi_ucrl(env: Environment, history: ExplorationHistory, k: int, schedule: PhaseSchedule,
                mu0: float, budget: int, rng: np.random.Generator) -> Tuple[OracleOutput, ExplorationHistory]:
    """Optimistic exploration at tolerance delta_k with early stopping.

    Both stopping rules are checked before every episode, including on entry with the
    inherited history; the loop also ends once the cumulative history reaches the budget.
    """
    delta_k = schedule.delta(k)
    known = env.known()
    t_entry = history.t
    while True:
        plan: PlanningResult = plan_optimistic(history, known, delta_k)
        if stop_positive(plan, schedule.C, mu0):
            verdict = OracleVerdict.POLICY_FOUND
            break
        if stop_negative(plan, mu0):
            verdict = OracleVerdict.NONE_FOUND
            break
        if history.t > budget - 1:
            verdict = OracleVerdict.NOT_COMPLETED
            break
        history.record(env.sample(plan.pi_bar, rng))

    logger.debug("phase %d oracle: %s after %d episodes (V_bar=%.4f, V_under=%.4f)",
                 k, verdict.value, history.t - t_entry, plan.v_bar_root, plan.v_under_root)
    output = OracleOutput(
        verdict=verdict,
        episodes_used=history.t - t_entry,
        final_v_bar_root=plan.v_bar_root,
        final_v_under_root=plan.v_under_root,
        policy=plan.pi_bar if verdict is OracleVerdict.POLICY_FOUND else None,
    )
    return output, history


def exploitation_stage(env: Environment, policy_candidate: Policy, k: int, schedule: PhaseSchedule,
                       delta: float, mu0: float, rng: np.random.Generator,
                       variance_factor: float = 1.0) -> ExploitationResult:
    """Fresh episodes of the candidate until its anytime lower bound clears mu0 or the budget runs out."""
    budget = exploitation_budget(k, env.H, schedule, delta)
    rewards: List[float] = []
    total = 0.0
    while len(rewards) < budget - 1:
        x = env.sample(policy_candidate, rng).total_reward
        rewards.append(x)
        total += x
        N = len(rewards)
        if exploitation_lcb(total / N, N, k, env.H, delta, schedule, variance_factor) >= mu0:
            return ExploitationResult(accepted=True, N=N, rewards=tuple(rewards))
    return ExploitationResult(accepted=False, N=len(rewards), rewards=tuple(rewards))


def run_bee_gpi(env: Environment, mu0: float, delta: float, rng: np.random.Generator,
                phase_cap: Optional[int] = DEFAULT_PHASE_CAP,
                schedule: PhaseSchedule = PhaseSchedule(),
                lcb_variance_factor: float = 1.0) -> GpiOutcome:
    """Run phases until a qualified policy is verified, the instance is declared negative,
    or phase_cap phases have passed (reported as ABORTED)."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if lcb_variance_factor not in LCB_VARIANCE_FACTORS:
        raise ValueError(f"lcb_variance_factor must be one of {LCB_VARIANCE_FACTORS}")

    history = ExplorationHistory.empty(env.S, env.A, env.H)
    outcome = GpiOutcome(verdict=GpiVerdict.ABORTED, tau=0)
    exploitation_total = 0
    k = 0
    while phase_cap is None or k < phase_cap:
        k += 1
        budget = exploration_budget(k, env.S, env.A, env.H, schedule)
        oracle, history = es_bpi_ucrl(env, history, k, schedule, mu0, budget, rng)
        record = PhaseRecord(
            k=k,
            oracle_verdict=oracle.verdict,
            exploration_episodes=oracle.episodes_used,
            history_size=history.t,
            exploration_budget=budget,
            v_bar_root=oracle.final_v_bar_root,
            v_under_root=oracle.final_v_under_root,
        )
        outcome.phases.append(record)

        if oracle.verdict is OracleVerdict.NONE_FOUND and schedule.delta(k) < delta / 10:
            outcome.verdict = GpiVerdict.DECLARED_NEGATIVE
            break
        if oracle.verdict is not OracleVerdict.POLICY_FOUND:
            continue

        check = exploitation_stage(env, oracle.policy, k, schedule, delta, mu0, rng, lcb_variance_factor)
        record.exploitation_episodes = check.N
        record.exploitation_budget = exploitation_budget(k, env.H, schedule, delta)
        record.accepted = check.accepted
        exploitation_total += check.N
        outcome.exploitation_history.extend(check.rewards)
        if check.accepted:
            outcome.verdict = GpiVerdict.QUALIFIED
            outcome.policy = oracle.policy
            break
    else:
        logger.warning("phase cap %s reached without a verdict", phase_cap)

    outcome.tau = history.t + exploitation_total
    logger.info("BEE-GPI finished: %s after %d phases, tau=%d",
                outcome.verdict.value, len(outcome.phases), outcome.tau)
    return outcome
