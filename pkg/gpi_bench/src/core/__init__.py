"""
Core functionality for GPI Bench.
"""

from .mdp import (
    TabularMDP,
    Policy,
    Environment,
    evaluate_policy,
    optimal_value_and_policy,
    sample_episode,
)
from .bee_gpi import run_bee_gpi, GpiVerdict
from .bpi_baseline import run_bpi_ucrl
from .instances import build_instance

__all__ = [
    'TabularMDP',
    'Policy',
    'Environment',
    'evaluate_policy',
    'optimal_value_and_policy',
    'sample_episode',
    'run_bee_gpi',
    'GpiVerdict',
    'run_bpi_ucrl',
    'build_instance',
]
