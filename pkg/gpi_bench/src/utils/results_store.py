import json
import logging
import math
import threading
from pathlib import Path
from typing import Dict, Iterable, List, Union

import pandas as pd

logger = logging.getLogger(__name__)

# Stable column order of results.csv; the golden-header test pins it.
CSV_COLUMNS = ['trial', 'seed', 'algorithm', 'mu0', 'tau', 'verdict', 'verdict_correct', 'wall_ms']
SUMMARY_COLUMNS = ['algorithm', 'mu0', 'trials', 'mean_tau', 'std_tau', 'correct_rate', 'aborted']
PHASE_LOG_FIELDS = ['trial', 'algorithm', 'mu0', 'seed', 'phase', 'stage', 'episodes',
                    'history_size', 'budget', 'v_bar_root', 'v_under_root', 'verdict']


def results_frame(records: Iterable[Dict]) -> pd.DataFrame:
    """Build the results table in canonical column and row order."""
    df = pd.DataFrame(list(records), columns=CSV_COLUMNS)
    if df.empty:
        return df
    df = df.sort_values(['algorithm', 'mu0', 'trial'], kind='mergesort').reset_index(drop=True)
    df['verdict_correct'] = df['verdict_correct'].astype(bool)
    return df


def write_results(df: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, columns=CSV_COLUMNS, lineterminator='\n')
    logger.info(f"Wrote {len(df)} trial records to {path}")
    return path


def read_results(path: Union[str, Path]) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path} is not a results table (missing columns: {', '.join(missing)})")
    return df


def summarize(df: pd.DataFrame) -> pd.DataFrame:
    """Mean and population standard deviation of tau, correctness and abort counts per cell."""
    if df.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    grouped = df.groupby(['algorithm', 'mu0'], sort=True)
    summary = grouped.agg(
        trials=('tau', 'size'),
        mean_tau=('tau', 'mean'),
        std_tau=('tau', lambda s: s.std(ddof=0)),
        correct_rate=('verdict_correct', 'mean'),
        aborted=('verdict', lambda s: int((s == 'aborted').sum())),
    ).reset_index()
    return summary[SUMMARY_COLUMNS]


class PhaseLogWriter:
    """Appends per-phase records as JSON lines; safe to share between threads."""

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self.path.write_text('')

    def write_many(self, records: Iterable[Dict]) -> None:
        lines = [json.dumps({name: r.get(name) for name in PHASE_LOG_FIELDS}) for r in records]
        if not lines:
            return
        with self._lock:
            with open(self.path, 'a') as f:
                f.write('\n'.join(lines) + '\n')


def read_phase_log(path: Union[str, Path]) -> List[Dict]:
    records = []
    with open(path, 'r') as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno} is not valid JSON: {e}")
    return records


def audit_phase_log(source: Union[str, Path, Iterable[Dict]]) -> List[str]:
    """
    Check budget compliance of logged phases.

    After every exploration stage the cumulative history must not exceed the phase budget,
    and every verification stage must stop at most one episode short of its budget.

    Returns:
        List of human-readable violations; empty when the log is compliant.
    """
    if isinstance(source, (str, Path)):
        records = read_phase_log(source)
    else:
        records = list(source)

    violations = []
    for record in records:
        stage = record.get('stage')
        budget = record.get('budget')
        if budget is None or (isinstance(budget, float) and math.isnan(budget)):
            continue
        where = (f"trial {record.get('trial')} {record.get('algorithm')} "
                 f"mu0={record.get('mu0')} phase {record.get('phase')}")
        if stage == 'exploration' and record.get('history_size', 0) > budget:
            violations.append(f"{where}: history {record['history_size']} exceeds exploration budget {budget}")
        elif stage == 'exploitation' and record.get('episodes', 0) > budget - 1:
            violations.append(f"{where}: {record['episodes']} verification episodes exceed budget-1 = {budget - 1}")
    return violations
