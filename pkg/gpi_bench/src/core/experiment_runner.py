import logging
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.stats import spearmanr

from .bee_gpi import GpiVerdict, PhaseSchedule, run_bee_gpi
from .bpi_baseline import run_bpi_ucrl
from .mdp import Environment, TabularMDP, evaluate_policy
from ..utils.config import ExperimentConfig, check_thresholds, resolve_instance
from ..utils.paths import prepare_output_directory
from ..utils.results_store import PhaseLogWriter, results_frame, summarize, write_results
from ..utils.seeding import derive_child_seed, make_rng
from ..utils.trial_tracker import TrialTracker

logger = logging.getLogger(__name__)

RESULTS_FILE = 'results.csv'
SUMMARY_FILE = 'summary.csv'
PHASE_LOG_FILE = 'phases.jsonl'


@dataclass
class RunMetrics:
    total_trials: int = 0
    completed_trials: int = 0
    failed_trials: int = 0
    aborted_trials: int = 0
    start_time: float = 0.0

    @property
    def elapsed_time(self) -> float:
        return time.time() - self.start_time

    @property
    def trials_per_second(self) -> float:
        if self.elapsed_time == 0:
            return 0
        return self.completed_trials / self.elapsed_time


@dataclass(frozen=True)
class TrialTask:
    trial: int
    algorithm: str
    mu0: float
    seed: int
    mdp: TabularMDP
    optimal_value: float
    delta: float
    phase_cap: int
    episode_cap: int
    lcb_variance_factor: int = 1
    record_wall_time: bool = True


@dataclass
class TrialRecord:
    trial: int
    seed: int
    algorithm: str
    mu0: float
    tau: int
    verdict: str
    verdict_correct: bool
    wall_ms: int
    phase_log: List[Dict] = field(default_factory=list)

    def as_row(self) -> Dict:
        return {
            'trial': self.trial,
            'seed': self.seed,
            'algorithm': self.algorithm,
            'mu0': self.mu0,
            'tau': self.tau,
            'verdict': self.verdict,
            'verdict_correct': self.verdict_correct,
            'wall_ms': self.wall_ms,
        }


def _log_entry(task: TrialTask, **fields) -> Dict:
    entry = {'trial': task.trial, 'algorithm': task.algorithm, 'mu0': task.mu0, 'seed': task.seed}
    entry.update(fields)
    return entry


def _run_bee_gpi_trial(task: TrialTask, env: Environment, rng: np.random.Generator):
    outcome = run_bee_gpi(env, task.mu0, task.delta, rng, phase_cap=task.phase_cap,
                          lcb_variance_factor=task.lcb_variance_factor)
    # The learner only ever sees env; task.mdp is read after it has finished.
    if outcome.verdict is GpiVerdict.QUALIFIED:
        correct = evaluate_policy(task.mdp, outcome.policy) >= task.mu0
    elif outcome.verdict is GpiVerdict.DECLARED_NEGATIVE:
        correct = task.optimal_value < task.mu0
    else:
        correct = False

    log = []
    for phase in outcome.phases:
        log.append(_log_entry(
            task, phase=phase.k, stage='exploration', episodes=phase.exploration_episodes,
            history_size=phase.history_size, budget=phase.exploration_budget,
            v_bar_root=phase.v_bar_root, v_under_root=phase.v_under_root,
            verdict=phase.oracle_verdict.value))
        if phase.exploitation_budget is not None:
            log.append(_log_entry(
                task, phase=phase.k, stage='exploitation', episodes=phase.exploitation_episodes,
                history_size=phase.history_size, budget=phase.exploitation_budget,
                v_bar_root=phase.v_bar_root, v_under_root=phase.v_under_root,
                verdict='accepted' if phase.accepted else 'rejected'))
    return outcome.tau, outcome.verdict.value, bool(correct), log


def _run_bpi_trial(task: TrialTask, env: Environment, rng: np.random.Generator):
    epsilon = task.optimal_value - task.mu0
    outcome = run_bpi_ucrl(env, epsilon, task.delta, rng, episode_cap=task.episode_cap)
    if outcome.aborted:
        verdict, correct = 'aborted', False
    else:
        verdict = GpiVerdict.QUALIFIED.value
        correct = evaluate_policy(task.mdp, outcome.policy) >= task.mu0
    log = [_log_entry(
        task, phase=0, stage='bpi-baseline', episodes=outcome.tau, history_size=outcome.tau,
        budget=task.episode_cap, v_bar_root=outcome.v_bar_root, v_under_root=outcome.v_under_root,
        verdict=verdict)]
    return outcome.tau, verdict, bool(correct), log


TRIAL_RUNNERS = {
    'bee-gpi': _run_bee_gpi_trial,
    'bpi-ucrl': _run_bpi_trial,
}


def run_trial(task: TrialTask) -> TrialRecord:
    """Run one (algorithm, mu0, trial) cell from its own seed. Top-level so worker processes can pickle it."""
    if task.algorithm not in TRIAL_RUNNERS:
        raise ValueError(f"Unknown algorithm: {task.algorithm}")
    started = time.perf_counter()
    env = Environment(task.mdp)
    rng = make_rng(task.seed)
    tau, verdict, correct, log = TRIAL_RUNNERS[task.algorithm](task, env, rng)
    wall_ms = int(round((time.perf_counter() - started) * 1000)) if task.record_wall_time else 0
    return TrialRecord(
        trial=task.trial, seed=task.seed, algorithm=task.algorithm, mu0=task.mu0,
        tau=int(tau), verdict=verdict, verdict_correct=correct, wall_ms=wall_ms, phase_log=log,
    )


def build_tasks(config: ExperimentConfig, mdp: TabularMDP, optimal_value: float) -> List[TrialTask]:
    tasks = []
    for algorithm in config.algorithms:
        for mu0 in config.mu0_grid:
            for trial in range(config.trials):
                tasks.append(TrialTask(
                    trial=trial,
                    algorithm=algorithm,
                    mu0=float(mu0),
                    seed=derive_child_seed(config.base_seed, algorithm, mu0, trial),
                    mdp=mdp,
                    optimal_value=optimal_value,
                    delta=config.delta,
                    phase_cap=config.phase_cap,
                    episode_cap=config.episode_cap,
                    lcb_variance_factor=config.lcb_variance_factor,
                    record_wall_time=config.record_wall_time,
                ))
    return tasks


class ExperimentRunner:
    """Runs independent trials, in worker processes when max_workers > 1."""

    def __init__(self, max_workers: int = 1, use_processes: bool = True):
        if max_workers < 1:
            raise ValueError("max_workers must be at least 1")
        self.max_workers = max_workers
        self.use_processes = use_processes
        self.metrics = RunMetrics()
        self.tracker = TrialTracker()

    def run(self, tasks: List[TrialTask]) -> List[TrialRecord]:
        self.metrics = RunMetrics(total_trials=len(tasks), start_time=time.time())
        self.tracker = TrialTracker()
        keys = [self.tracker.add_trial(t.algorithm, t.mu0, t.trial) for t in tasks]

        if self.max_workers == 1:
            results = []
            for key, task in zip(keys, tasks):
                self.tracker.update_status(key, 'running')
                results.append(self._collect(key, lambda task=task: run_trial(task)))
            return [r for r in results if r is not None]

        executor_cls = ProcessPoolExecutor if self.use_processes else ThreadPoolExecutor
        with executor_cls(max_workers=self.max_workers) as executor:
            futures = []
            for key, task in zip(keys, tasks):
                self.tracker.update_status(key, 'running')
                futures.append((key, executor.submit(run_trial, task)))
            results = [self._collect(key, future.result) for key, future in futures]
        return [r for r in results if r is not None]

    def _collect(self, key, fetch) -> Optional[TrialRecord]:
        try:
            record = fetch()
        except Exception as e:
            logging.error(f"Error running trial {key}: {e}")
            self.tracker.update_status(key, 'failed', error=str(e))
            self.metrics.failed_trials += 1
            return None
        self.tracker.update_status(key, 'completed', verdict=record.verdict)
        self.metrics.completed_trials += 1
        if record.verdict == 'aborted':
            self.metrics.aborted_trials += 1
        return record


@dataclass
class ExperimentResult:
    results: pd.DataFrame
    summary: pd.DataFrame
    optimal_value: float
    metrics: RunMetrics
    results_path: Path
    summary_path: Path
    phase_log_path: Path

    @property
    def aborted(self) -> int:
        return int((self.results['verdict'] == 'aborted').sum()) if not self.results.empty else 0


def run_experiment(config: ExperimentConfig, jobs: int = 1,
                   output_directory: Optional[Path] = None) -> ExperimentResult:
    """
    Run every (algorithm, mu0, trial) cell of the config and persist the results.

    Writes results.csv, summary.csv and phases.jsonl to the output directory. Rows and log
    lines are sorted, so the files do not depend on the number of workers.
    """
    mdp, optimal_value = resolve_instance(config)
    check_thresholds(config, optimal_value)
    output = prepare_output_directory(output_directory or config.output_directory)

    tasks = build_tasks(config, mdp, optimal_value)
    logger.info(f"Running {len(tasks)} trials on {config.instance.family} "
                f"(V*={optimal_value:.4f}, delta={config.delta}) with {jobs} worker(s)")
    runner = ExperimentRunner(max_workers=jobs)
    records = runner.run(tasks)
    failed = runner.tracker.failed()
    if failed:
        details = '; '.join(f"{t.algorithm} mu0={t.mu0} trial={t.trial}: {t.error}" for t in failed)
        raise RuntimeError(f"{len(failed)} trial(s) failed: {details}")

    records.sort(key=lambda r: (r.algorithm, r.mu0, r.trial))
    results = results_frame(r.as_row() for r in records)
    summary = summarize(results)

    results_path = write_results(results, output / RESULTS_FILE)
    summary_path = output / SUMMARY_FILE
    summary.to_csv(summary_path, index=False, lineterminator='\n')
    phase_log = PhaseLogWriter(output / PHASE_LOG_FILE)
    for record in records:
        phase_log.write_many(record.phase_log)

    logger.info(f"Finished {runner.metrics.completed_trials} trials in {runner.metrics.elapsed_time:.1f}s "
                f"({runner.metrics.trials_per_second:.2f}/s, {runner.metrics.aborted_trials} aborted, "
                f"status counts {runner.tracker.counts()})")
    return ExperimentResult(
        results=results, summary=summary, optimal_value=optimal_value, metrics=runner.metrics,
        results_path=results_path, summary_path=summary_path, phase_log_path=phase_log.path,
    )


def ordering_report(summary: pd.DataFrame, fast: str = 'bee-gpi', slow: str = 'bpi-ucrl') -> pd.DataFrame:
    """Per-threshold mean tau of two algorithms and whether the first is strictly faster."""
    means = summary.pivot(index='mu0', columns='algorithm', values='mean_tau')
    for name in (fast, slow):
        if name not in means.columns:
            raise ValueError(f"Summary has no rows for algorithm '{name}'")
    report = pd.DataFrame({
        'mu0': means.index.to_numpy(),
        f'{fast}_mean_tau': means[fast].to_numpy(),
        f'{slow}_mean_tau': means[slow].to_numpy(),
    })
    report['ordered'] = report[f'{fast}_mean_tau'] < report[f'{slow}_mean_tau']
    return report


def gap_scaling_correlation(summary: pd.DataFrame, algorithm: str = 'bee-gpi') -> float:
    """Spearman rank correlation between mu0 and mean tau; NaN with fewer than two cells."""
    cells = summary[summary['algorithm'] == algorithm].sort_values('mu0')
    if len(cells) < 2:
        return float('nan')
    rho, _ = spearmanr(cells['mu0'], cells['mean_tau'])
    return float(rho)
