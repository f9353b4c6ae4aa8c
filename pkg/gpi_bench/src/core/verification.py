"""
Brute-force oracle battery for the solver, the dynamic programs and the instance families.

Every check is a plain function returning (passed, detail); verify_suite runs the ones whose
name matches the filter and collects a report.
"""

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .instances import PermutationSet, permute_instance, permute_policy, single_chain, tree_instance, uniform_instance
from .kl_confidence import kl_max_linear, kl_min_linear
from .mdp import TabularMDP, enumerate_policies, evaluate_policy, optimal_value_and_policy, sample_returns

logger = logging.getLogger(__name__)

VERIFY_SEED = 20240607
KL_ORACLE_TRIPLES = 200
KL_ORACLE_TOLERANCE = 1e-4
IDENTITY_TOLERANCE = 1e-10
MONTE_CARLO_EPISODES = 100_000
MONTE_CARLO_SEEDS = (0, 1, 2)

# (step, half-width) of the successive grid passes; the first pass covers the whole simplex.
GRID_PASSES = ((1e-3, None), (1e-5, 2e-3), (1e-7, 2e-5))


def _simplex_points(S: int, step: float, center: Optional[np.ndarray], half_width: Optional[float]) -> np.ndarray:
    axes = []
    for i in range(S - 1):
        lo, hi = (0.0, 1.0) if center is None else (max(0.0, center[i] - half_width), min(1.0, center[i] + half_width))
        axes.append(np.arange(lo, hi + step / 2, step))
    mesh = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing='ij')], axis=1)
    last = 1.0 - mesh.sum(axis=1)
    keep = last >= -1e-12
    return np.column_stack([mesh[keep], np.clip(last[keep], 0.0, None)])


def _kl_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    support = p > 0
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(support, p * np.log(np.where(support, p, 1.0) / q), 0.0)
    return terms.sum(axis=1)


def grid_kl_max(p_hat: np.ndarray, v: np.ndarray, eps: float) -> float:
    """max q.v over simplex grid points with KL(p_hat, q) <= eps, refined around the incumbent."""
    S = len(p_hat)
    best_value, best_point = float(p_hat @ v), p_hat
    center = None
    for step, half_width in GRID_PASSES:
        points = _simplex_points(S, step, center, half_width)
        feasible = _kl_rows(p_hat, points) <= eps
        if feasible.any():
            values = points[feasible] @ v
            i = int(np.argmax(values))
            if values[i] > best_value:
                best_value, best_point = float(values[i]), points[feasible][i]
        center = best_point
    return best_value


def _random_triple(rng: np.random.Generator, S: int) -> Tuple[np.ndarray, np.ndarray, float]:
    p = rng.dirichlet(np.ones(S))
    if rng.random() < 0.3:
        p[rng.integers(S)] = 0.0
        p = p / p.sum()
    v = rng.random(S)
    eps = float(rng.uniform(0.001, 0.5))
    return p, v, eps


def check_kl_grid_oracle() -> Tuple[bool, str]:
    rng = np.random.default_rng(VERIFY_SEED)
    worst = 0.0
    for S in (2, 3):
        for _ in range(KL_ORACLE_TRIPLES):
            p, v, eps = _random_triple(rng, S)
            solver = kl_max_linear(p, v, eps).value
            worst = max(worst, abs(solver - grid_kl_max(p, v, eps)))
    return worst <= KL_ORACLE_TOLERANCE, f"max |solver - grid| = {worst:.2e}"


def check_kl_negation() -> Tuple[bool, str]:
    rng = np.random.default_rng(VERIFY_SEED + 1)
    worst = 0.0
    for _ in range(100):
        S = int(rng.integers(2, 6))
        p, v, eps = _random_triple(rng, S)
        low = kl_min_linear(p, v, eps).value
        high = kl_max_linear(p, -v, eps).value
        worst = max(worst, abs(low + high))
        if low > p @ v + 1e-12:
            return False, f"kl_min {low} above the empirical mean {p @ v}"
    return worst <= 1e-12, f"max |min(v) + max(-v)| = {worst:.2e}"


def random_mdp(rng: np.random.Generator, S: int, A: int, H: int) -> TabularMDP:
    transitions = rng.dirichlet(np.ones(S), size=(H, S, A))
    return TabularMDP(S=S, A=A, H=H, rewards=rng.random((H, S, A)),
                      transitions=transitions, initial_dist=rng.dirichlet(np.ones(S)))


def check_dp_exhaustive() -> Tuple[bool, str]:
    rng = np.random.default_rng(VERIFY_SEED + 2)
    worst = 0.0
    for S, A, H in [(2, 2, 3), (2, 2, 4), (3, 2, 3), (2, 3, 2), (1, 4, 5)]:
        mdp = random_mdp(rng, S, A, H)
        value, policy = optimal_value_and_policy(mdp)
        brute = max(evaluate_policy(mdp, pi) for pi in enumerate_policies(mdp))
        worst = max(worst, abs(value - brute), abs(value - evaluate_policy(mdp, policy)))
    return worst <= IDENTITY_TOLERANCE, f"max deviation from exhaustive search = {worst:.2e}"


def uniform_parameter_grid() -> List[Dict]:
    combos = []
    for S, A, H in itertools.product((3, 4, 6), (2, 3), (2, 4, 8)):
        for r, eps in ((0.3, 0.1), (0.5, 0.2)):
            combos.append(dict(S=S, A=A, H=H, r=r, eps=eps))
    return combos


def tree_parameter_grid() -> List[Dict]:
    combos = []
    for S, H in ((3, 7), (3, 10), (5, 13), (5, 16), (9, 19)):
        for A, r in itertools.product((3, 4), (0.4, 0.5)):
            combos.append(dict(S=S, A=A, H=H, r=r))
    return combos


def check_uniform_identity() -> Tuple[bool, str]:
    worst = 0.0
    combos = uniform_parameter_grid()
    for params in combos:
        value, _ = optimal_value_and_policy(uniform_instance(**params))
        worst = max(worst, abs(value - params['H'] * (params['r'] + params['eps']) / 2))
    return worst <= IDENTITY_TOLERANCE, f"{len(combos)} instances, max error {worst:.2e}"


def check_tree_identity() -> Tuple[bool, str]:
    worst = 0.0
    combos = tree_parameter_grid()
    for params in combos:
        value, _ = optimal_value_and_policy(tree_instance(**params))
        worst = max(worst, abs(value - (params['H'] - 1) * params['r']))
    return worst <= IDENTITY_TOLERANCE, f"{len(combos)} instances, max error {worst:.2e}"


def check_monte_carlo() -> Tuple[bool, str]:
    mdp = single_chain()
    value, policy = optimal_value_and_policy(mdp)
    details = []
    for seed in MONTE_CARLO_SEEDS:
        returns = sample_returns(mdp, policy, MONTE_CARLO_EPISODES, np.random.default_rng(seed))
        se = returns.std(ddof=1) / np.sqrt(len(returns))
        z = abs(returns.mean() - value) / se
        details.append(f"seed {seed}: z={z:.2f}")
        if z > 3:
            return False, "; ".join(details)
    return True, "; ".join(details)


def check_permutation_invariance() -> Tuple[bool, str]:
    rng = np.random.default_rng(VERIFY_SEED + 3)
    worst = 0.0
    for _ in range(10):
        mdp = random_mdp(rng, 3, 3, 4)
        sigma = PermutationSet.random(mdp.H, mdp.S, mdp.A, rng)
        permuted = permute_instance(mdp, sigma)
        value, policy = optimal_value_and_policy(mdp)
        permuted_value, _ = optimal_value_and_policy(permuted)
        moved = evaluate_policy(permuted, permute_policy(policy, sigma))
        worst = max(worst, abs(value - permuted_value), abs(value - moved))
    return worst <= IDENTITY_TOLERANCE, f"max value change under relabelling = {worst:.2e}"


CHECKS: Dict[str, Callable[[], Tuple[bool, str]]] = {
    'kl-grid-oracle': check_kl_grid_oracle,
    'kl-negation': check_kl_negation,
    'dp-exhaustive': check_dp_exhaustive,
    'uniform-identity': check_uniform_identity,
    'tree-identity': check_tree_identity,
    'monte-carlo': check_monte_carlo,
    'permutation-invariance': check_permutation_invariance,
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


@dataclass
class VerificationReport:
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r.passed for r in self.results)

    @property
    def names(self) -> List[str]:
        return [r.name for r in self.results]

    def format(self) -> str:
        lines = [f"{'PASS' if r.passed else 'FAIL'}  {r.name:<24} {r.seconds:6.2f}s  {r.detail}"
                 for r in self.results]
        lines.append(f"{sum(r.passed for r in self.results)}/{len(self.results)} checks passed")
        return "\n".join(lines)


def verify_suite(name_filter: Optional[str] = None) -> VerificationReport:
    """Run every check whose name contains name_filter (all checks when None)."""
    selected = [name for name in CHECKS if not name_filter or name_filter in name]
    if not selected:
        raise ValueError(f"No verification check matches '{name_filter}' (known: {', '.join(CHECKS)})")
    report = VerificationReport()
    for name in selected:
        started = time.perf_counter()
        try:
            passed, detail = CHECKS[name]()
        except Exception as e:
            logging.error(f"Verification check {name} raised: {e}")
            passed, detail = False, f"raised {type(e).__name__}: {e}"
        report.results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - started))
        logger.info(f"{name}: {'pass' if passed else 'FAIL'} ({detail})")
    return report
