import hashlib

import numpy as np


def derive_child_seed(base_seed: int, algorithm: str, mu0: float, trial: int) -> int:
    """
    Derive the seed of one experiment cell.

    Args:
        base_seed: Experiment-wide seed
        algorithm: Algorithm name
        mu0: Threshold of the cell (1 and 1.0 give the same seed)
        trial: Trial index

    Returns:
        int: Non-negative 63-bit seed taken from a SHA-256 digest
    """
    key = f"{int(base_seed)}|{algorithm}|{float(mu0)!r}|{int(trial)}"
    digest = hashlib.sha256(key.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little') >> 1


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
