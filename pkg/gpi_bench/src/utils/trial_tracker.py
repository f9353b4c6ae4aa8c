from dataclasses import dataclass
from datetime import datetime
from typing import Dict, List, Optional, Tuple
import threading
import logging

TrialKey = Tuple[str, float, int]


@dataclass
class TrialStatus:
    algorithm: str
    mu0: float
    trial: int
    status: str  # 'pending', 'running', 'completed', 'failed'
    start_time: datetime
    end_time: Optional[datetime] = None
    error: Optional[str] = None
    verdict: Optional[str] = None


class TrialTracker:
    """Thread-safe status board for the trials of one experiment run"""

    def __init__(self):
        self._trials: Dict[TrialKey, TrialStatus] = {}
        self._lock = threading.Lock()

    def add_trial(self, algorithm: str, mu0: float, trial: int) -> TrialKey:
        key = (algorithm, float(mu0), trial)
        with self._lock:
            self._trials[key] = TrialStatus(
                algorithm=algorithm,
                mu0=float(mu0),
                trial=trial,
                status='pending',
                start_time=datetime.now()
            )
        return key

    def update_status(self, key: TrialKey, status: str, error: Optional[str] = None,
                      verdict: Optional[str] = None):
        with self._lock:
            entry = self._trials.get(key)
            if entry is None:
                logging.warning(f"Status update for unknown trial {key}")
                return
            entry.status = status
            if error:
                entry.error = error
            if verdict:
                entry.verdict = verdict
            if status in ['completed', 'failed']:
                entry.end_time = datetime.now()

    def failed(self) -> List[TrialStatus]:
        with self._lock:
            return [t for t in self._trials.values() if t.status == 'failed']

    def counts(self) -> Dict[str, int]:
        """Number of trials per status"""
        with self._lock:
            counts: Dict[str, int] = {}
            for t in self._trials.values():
                counts[t.status] = counts.get(t.status, 0) + 1
            return counts
