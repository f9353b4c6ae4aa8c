"""
Exploration statistics and linear optimization over KL confidence balls.

The ball around an empirical row p_hat is {q in simplex : KL(p_hat, q) <= eps},
with p_hat as the first KL argument.
"""

import copy
import logging
import math
from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np

from .mdp import Trajectory

logger = logging.getLogger(__name__)

INFEASIBLE = math.inf

BISECTION_TOLERANCE = 1e-10
BISECTION_MAX_ITER = 200
# Smallest dual gap tried before a row is declared saturated.
MIN_LOG_GAP = math.log(1e-300)

ArrayLike = Union[float, np.ndarray]


class KLInputError(ValueError):
    pass


def beta_p(t: ArrayLike, delta: float, S: int, A: int, H: int) -> ArrayLike:
    """Exploration bonus log(2SAH/delta) + (S-1) log(e (1 + t/(S-1))), natural logs."""
    if S < 2:
        raise KLInputError("beta_p is undefined for S = 1 (divides by S - 1)")
    if not 0.0 < delta < 1.0:
        raise KLInputError(f"delta must lie in (0, 1), got {delta}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise KLInputError("visit counts must be non-negative")
    out = math.log(2 * S * A * H / delta) + (S - 1) * (1.0 + np.log1p(t_arr / (S - 1)))
    return float(out) if out.ndim == 0 else out


def beta_cnt(delta: float, S: int, A: int, H: int) -> float:
    """Count-concentration threshold log(2SAH/delta). Analysis constant only."""
    return math.log(2 * S * A * H / delta)


def kl_categorical(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p, q) with 0 log 0 = 0; INFEASIBLE when q misses part of p's support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise KLInputError(f"shape mismatch {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        return INFEASIBLE
    return float(max(np.sum(p[support] * np.log(p[support] / q[support])), 0.0))


class ExplorationHistory:
    """Counts accumulated over every exploration episode.

    counts[h, s, a]                 visits of (s, a) at round h
    transition_counts[h, s, a, s']  for rounds h < H - 1 (the last round has no successor)
    initial_counts[s]               draws of the fictitious round-0 transition; sums to t
    """

    def __init__(self, S: int, A: int, H: int, counts: np.ndarray,
                 transition_counts: np.ndarray, initial_counts: np.ndarray, t: int):
        self.S, self.A, self.H = S, A, H
        self.counts = counts
        self.transition_counts = transition_counts
        self.initial_counts = initial_counts
        self.t = t

    @classmethod
    def empty(cls, S: int, A: int, H: int) -> 'ExplorationHistory':
        return cls(
            S, A, H,
            counts=np.zeros((H, S, A), dtype=np.int64),
            transition_counts=np.zeros((H - 1, S, A, S), dtype=np.int64),
            initial_counts=np.zeros(S, dtype=np.int64),
            t=0,
        )

    @classmethod
    def from_counts(cls, counts: np.ndarray, transition_counts: np.ndarray,
                    initial_counts: np.ndarray) -> 'ExplorationHistory':
        """Build a history from count tables (e.g. synthetic data for planner checks).

        Only per-row consistency is enforced; per-round totals may differ from t.
        """
        counts = np.asarray(counts, dtype=np.int64)
        transition_counts = np.asarray(transition_counts, dtype=np.int64)
        initial_counts = np.asarray(initial_counts, dtype=np.int64)
        H, S, A = counts.shape
        if transition_counts.shape != (H - 1, S, A, S) or initial_counts.shape != (S,):
            raise KLInputError("count tables have inconsistent shapes")
        if np.any(transition_counts.sum(axis=-1) != counts[:-1]):
            raise KLInputError("transition counts must sum to visit counts")
        return cls(S, A, H, counts.copy(), transition_counts.copy(), initial_counts.copy(),
                   t=int(initial_counts.sum()))

    @property
    def round_zero_count(self) -> int:
        return self.t

    def record(self, traj: Trajectory) -> None:
        if len(traj.states) != self.H or len(traj.actions) != self.H:
            raise KLInputError(f"trajectory length must equal H={self.H}")
        self.t += 1
        self.initial_counts[traj.states[0]] += 1
        for h, (s, a) in enumerate(zip(traj.states, traj.actions)):
            self.counts[h, s, a] += 1
            if h < self.H - 1:
                self.transition_counts[h, s, a, traj.states[h + 1]] += 1

    def snapshot(self) -> 'ExplorationHistory':
        return copy.deepcopy(self)

    def same_as(self, other: 'ExplorationHistory') -> bool:
        return (
            self.t == other.t
            and np.array_equal(self.counts, other.counts)
            and np.array_equal(self.transition_counts, other.transition_counts)
            and np.array_equal(self.initial_counts, other.initial_counts)
        )

    def invariant_violations(self) -> list:
        problems = []
        if np.any(self.transition_counts.sum(axis=-1) != self.counts[:-1]):
            problems.append("transition counts do not sum to visit counts")
        if np.any(self.counts.sum(axis=(1, 2)) != self.t):
            problems.append("per-round visit totals differ from t")
        if int(self.initial_counts.sum()) != self.t:
            problems.append("round-0 count differs from t")
        return problems


def update_history(history: ExplorationHistory, traj: Trajectory) -> ExplorationHistory:
    history.record(traj)
    return history


@dataclass(frozen=True)
class EmpiricalKernel:
    rows: np.ndarray      # (H - 1, S, A, S)
    initial: np.ndarray   # (S,), empirical round-0 row


def empirical_kernel(history: ExplorationHistory) -> EmpiricalKernel:
    """Frequencies where a pair was visited, the uniform row 1/S otherwise."""
    S = history.S
    visits = history.counts[:-1, :, :, None]
    with np.errstate(invalid='ignore', divide='ignore'):
        rows = np.where(visits > 0, history.transition_counts / np.maximum(visits, 1), 1.0 / S)
    if history.t > 0:
        initial = history.initial_counts / history.t
    else:
        initial = np.full(S, 1.0 / S)
    return EmpiricalKernel(rows=rows, initial=initial)


@dataclass(frozen=True)
class KlBallSolution:
    value: float
    q: np.ndarray
    dual: float
    iterations: int
    saturated: bool = False


def _validate_solver_inputs(p: np.ndarray, v: np.ndarray, eps: np.ndarray) -> None:
    if np.any(np.isnan(v)) or np.any(np.isinf(v)):
        raise KLInputError("value vector must be finite")
    if np.any(np.isnan(eps)) or np.any(eps < 0):
        raise KLInputError("KL radius must be non-negative")
    if p.shape[-1] != v.shape[0]:
        raise KLInputError(f"p_hat has {p.shape[-1]} states, v has {v.shape[0]}")
    if np.any(p < 0) or np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-9):
        raise KLInputError("p_hat rows must be probability vectors")


def _dual_gap_fn(p: np.ndarray, support: np.ndarray, gaps: np.ndarray):
    """f(g) = sum_i p_i log(g + d_i) + log sum_i p_i / (g + d_i) over the support of each row.

    f is decreasing in g > 0 and equals KL(p_hat, q_g) for the tilted row q_g.
    """
    def f(rows: np.ndarray, g: np.ndarray) -> np.ndarray:
        sup = support[rows]
        denom = np.where(sup, g[:, None] + gaps[rows], 1.0)
        weighted = np.where(sup, p[rows] / denom, 0.0).sum(axis=1)
        return (p[rows] * np.where(sup, np.log(denom), 0.0)).sum(axis=1) + np.log(weighted)
    return f


def _tilted_rows(p: np.ndarray, support: np.ndarray, gaps: np.ndarray, g: np.ndarray) -> np.ndarray:
    weights = np.where(support, p / np.where(support, g[:, None] + gaps, 1.0), 0.0)
    return weights / weights.sum(axis=1, keepdims=True)


def kl_max_linear_batch(p_hat: np.ndarray, v: np.ndarray, eps: ArrayLike,
                        tol: float = BISECTION_TOLERANCE,
                        max_iter: int = BISECTION_MAX_ITER
                        ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """max_q q.v subject to KL(p_hat_m, q) <= eps_m, for every row m of p_hat at once.

    Returns (values, q, duals, iterations, saturated). The maximizer is
    q_i proportional to p_i / (nu - v_i) on the support of the row, plus possibly mass on the
    argmax of v outside the support. nu is found by bisection on log(nu - max_support v).
    """
    p = np.atleast_2d(np.asarray(p_hat, dtype=float))
    v = np.asarray(v, dtype=float)
    M, S = p.shape
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (M,)).copy()
    _validate_solver_inputs(p, v, eps)

    values = np.empty(M)
    q = np.empty((M, S))
    duals = np.full(M, np.nan)
    iterations = np.zeros(M, dtype=np.int64)
    saturated = np.zeros(M, dtype=bool)
    done = np.zeros(M, dtype=bool)

    support = p > 0
    top_in = np.where(support, v, -np.inf).max(axis=1)
    low_in = np.where(support, v, np.inf).min(axis=1)
    top_out = np.where(support, -np.inf, v).max(axis=1)

    # Unbounded radius: the supremum puts everything on argmax v.
    unbounded = np.isinf(eps)
    if unbounded.any():
        best = int(np.argmax(v))
        q[unbounded] = 0.0
        q[unbounded, best] = 1.0
        values[unbounded] = v[best]
        duals[unbounded] = v[best]
        saturated[unbounded] = True
        done |= unbounded

    # Nothing to gain: zero radius, or v constant on the support with no better state outside.
    flat = ~done & ((eps == 0) | ((top_in == low_in) & (top_out <= top_in)))
    q[flat] = p[flat]
    values[flat] = p[flat] @ v
    done |= flat

    gaps = np.where(support, top_in[:, None] - v, 0.0)
    f = _dual_gap_fn(p, support, gaps)
    v_range = float(v.max() - v.min())

    log_lo = np.full(M, np.nan)
    outside = np.flatnonzero(~done & (top_out > top_in))
    if outside.size:
        g_bar = top_out[outside] - top_in[outside]
        f_bar = f(outside, g_bar)
        jump = f_bar < eps[outside]
        rows = outside[jump]
        if rows.size:
            moved = 1.0 - np.exp(f_bar[jump] - eps[rows])
            inner = _tilted_rows(p[rows], support[rows], gaps[rows], g_bar[jump])
            targets = (~support[rows]) & (v[None, :] == top_out[rows][:, None])
            mass = (1.0 - moved)[:, None] * inner + moved[:, None] * targets / targets.sum(axis=1, keepdims=True)
            q[rows] = mass
            values[rows] = mass @ v
            duals[rows] = top_out[rows]
            done[rows] = True
        # The remaining outside rows have f(g_bar) >= eps, so the root lies above g_bar.
        log_lo[outside[~jump]] = np.log(g_bar[~jump])

    rows = np.flatnonzero(~done)
    if rows.size:
        target = eps[rows]
        x_hi = np.full(rows.size, math.log(v_range + 1.0))
        step = 1.0
        f_hi = f(rows, np.exp(x_hi))
        for _ in range(max_iter):
            high = f_hi > target
            if not high.any():
                break
            x_hi[high] += step
            step *= 2.0
            f_hi[high] = f(rows[high], np.exp(x_hi[high]))

        x_lo = log_lo[rows]
        missing = np.isnan(x_lo)
        x_lo[missing] = x_hi[missing] - 1.0
        step = 1.0
        for _ in range(max_iter):
            probe = missing & (x_lo > MIN_LOG_GAP)
            if not probe.any():
                break
            f_lo = f(rows[probe], np.exp(x_lo[probe]))
            low = f_lo < target[probe]
            idx = np.flatnonzero(probe)[low]
            missing[np.flatnonzero(probe)[~low]] = False
            x_lo[idx] = np.maximum(x_lo[idx] - step, MIN_LOG_GAP)
            step *= 2.0
        # Rows whose KL stays below eps even at the smallest gap: supremum not attained.
        stuck = np.zeros(rows.size, dtype=bool)
        floor_idx = np.flatnonzero(missing)
        if floor_idx.size:
            f_floor = f(rows[floor_idx], np.exp(x_lo[floor_idx]))
            hit = floor_idx[f_floor <= target[floor_idx]]
            x_hi[hit] = x_lo[hit]
            f_hi[hit] = f_floor[f_floor <= target[floor_idx]]
            stuck[hit] = True
            saturated[rows[hit]] = True

        active = ~stuck
        for _ in range(max_iter):
            active &= (f_hi < target - tol) & (x_hi - x_lo > 1e-15 * np.maximum(1.0, np.abs(x_hi)))
            if not active.any():
                break
            iterations[rows[active]] += 1
            mid = 0.5 * (x_lo[active] + x_hi[active])
            f_mid = f(rows[active], np.exp(mid))
            above = f_mid > target[active]
            idx = np.flatnonzero(active)
            x_lo[idx[above]] = mid[above]
            x_hi[idx[~above]] = mid[~above]
            f_hi[idx[~above]] = f_mid[~above]

        g = np.exp(x_hi)
        mass = _tilted_rows(p[rows], support[rows], gaps[rows], g)
        q[rows] = mass
        values[rows] = mass @ v
        duals[rows] = top_in[rows] + g

    return values, q, duals, iterations, saturated


def kl_min_linear_batch(p_hat: np.ndarray, v: np.ndarray, eps: ArrayLike):
    values, q, duals, iterations, saturated = kl_max_linear_batch(p_hat, -np.asarray(v, dtype=float), eps)
    return -values, q, duals, iterations, saturated


def kl_max_linear(p_hat: np.ndarray, v: np.ndarray, eps: float) -> KlBallSolution:
    values, q, duals, iterations, saturated = kl_max_linear_batch(p_hat, v, eps)
    return KlBallSolution(value=float(values[0]), q=q[0], dual=float(duals[0]),
                          iterations=int(iterations[0]), saturated=bool(saturated[0]))


def kl_min_linear(p_hat: np.ndarray, v: np.ndarray, eps: float) -> KlBallSolution:
    solution = kl_max_linear(p_hat, -np.asarray(v, dtype=float), eps)
    return replace(solution, value=-solution.value)
