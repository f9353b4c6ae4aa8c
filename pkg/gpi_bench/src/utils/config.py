import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Union

# Algorithms the harness knows how to run.
SUPPORTED_ALGORITHMS = ['bee-gpi', 'bpi-ucrl']

DESK_DELTA = 0.01
PAPER_DELTA = 0.001
SEED_ENV_VAR = 'GPI_SEED'
# Thresholds closer than this to V* count as the excluded boundary case.
BOUNDARY_TOLERANCE = 1e-12


class ConfigValidationError(Exception):
    pass


@dataclass(frozen=True)
class InstanceSpec:
    family: str
    params: Dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    instance: InstanceSpec
    algorithms: List[str]
    mu0_grid: List[float]
    delta: float = DESK_DELTA
    trials: int = 10
    base_seed: int = 0
    phase_cap: int = 40
    episode_cap: int = 2_000_000
    lcb_variance_factor: int = 1
    output_directory: str = 'results'
    record_wall_time: bool = True


def validate_config(config: Dict) -> ExperimentConfig:
    """Validates the raw JSON configuration and returns an ExperimentConfig."""
    if not isinstance(config, dict):
        raise ConfigValidationError("Config must be a JSON object")

    instance = config.get('instance')
    if not isinstance(instance, dict) or not isinstance(instance.get('family'), str):
        raise ConfigValidationError("Config must specify 'instance' with a 'family' name")
    params = instance.get('params', {})
    if not isinstance(params, dict):
        raise ConfigValidationError("'instance.params' must be an object")

    # Either 'algorithms' (list) or 'algorithm' (single name), but not both
    if ('algorithms' in config) == ('algorithm' in config):
        raise ConfigValidationError("Config must specify either 'algorithm' or 'algorithms', but not both")
    algorithms = config.get('algorithms', [config.get('algorithm')])
    if isinstance(algorithms, str):
        algorithms = [algorithms]
    if not algorithms or any(a not in SUPPORTED_ALGORITHMS for a in algorithms):
        raise ConfigValidationError(f"Algorithms must be taken from {SUPPORTED_ALGORITHMS}, got {algorithms}")
    if len(set(algorithms)) != len(algorithms):
        raise ConfigValidationError("Algorithms must not repeat")

    grid = config.get('mu0_grid')
    if not isinstance(grid, list) or not grid:
        raise ConfigValidationError("'mu0_grid' must be a non-empty list")
    if any(isinstance(m, bool) or not isinstance(m, (int, float)) for m in grid):
        raise ConfigValidationError("'mu0_grid' entries must be numbers")

    delta = config.get('delta', DESK_DELTA)
    if isinstance(delta, bool) or not isinstance(delta, (int, float)) or not 0 < delta < 1:
        raise ConfigValidationError("'delta' must lie in (0, 1)")

    int_fields = {'trials': 1, 'base_seed': 0, 'phase_cap': 1, 'episode_cap': 1}
    for name, minimum in int_fields.items():
        if name in config:
            value = config[name]
            if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
                raise ConfigValidationError(f"'{name}' must be an integer >= {minimum}")

    factor = config.get('lcb_variance_factor', 1)
    if factor not in (1, 4) or isinstance(factor, bool):
        raise ConfigValidationError("'lcb_variance_factor' must be 1 or 4")

    if 'record_wall_time' in config and not isinstance(config['record_wall_time'], bool):
        raise ConfigValidationError("'record_wall_time' must be a boolean value")

    defaults = ExperimentConfig(instance=InstanceSpec(''), algorithms=[], mu0_grid=[])
    return ExperimentConfig(
        instance=InstanceSpec(family=instance['family'], params=dict(params)),
        algorithms=list(algorithms),
        mu0_grid=[float(m) for m in grid],
        delta=float(delta),
        trials=config.get('trials', defaults.trials),
        base_seed=config.get('base_seed', defaults.base_seed),
        phase_cap=config.get('phase_cap', defaults.phase_cap),
        episode_cap=config.get('episode_cap', defaults.episode_cap),
        lcb_variance_factor=factor,
        output_directory=str(config.get('output_directory', defaults.output_directory)),
        record_wall_time=config.get('record_wall_time', defaults.record_wall_time),
    )


def check_thresholds(config: ExperimentConfig, optimal_value: float) -> None:
    """Reject the excluded boundary mu0 = V*, and negative gaps for the oracle-epsilon baseline."""
    for mu0 in config.mu0_grid:
        if abs(mu0 - optimal_value) <= BOUNDARY_TOLERANCE:
            raise ConfigValidationError(
                f"mu0={mu0} equals the optimal value V*={optimal_value}; the boundary case is excluded")
        if 'bpi-ucrl' in config.algorithms and mu0 > optimal_value:
            raise ConfigValidationError(
                f"bpi-ucrl needs epsilon = V* - mu0 > 0, but mu0={mu0} exceeds V*={optimal_value:.6f}")


def apply_overrides(config: ExperimentConfig, paper_delta: bool = False,
                    environ: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    environ = os.environ if environ is None else environ
    if paper_delta:
        config = replace(config, delta=PAPER_DELTA)
    seed = environ.get(SEED_ENV_VAR)
    if seed:
        try:
            config = replace(config, base_seed=int(seed))
        except ValueError:
            raise ConfigValidationError(f"{SEED_ENV_VAR} must be an integer, got {seed!r}")
    return config


def resolve_instance(config: ExperimentConfig):
    """Build the configured MDP and its optimal value."""
    from ..core.instances import InstanceParameterError, build_instance
    from ..core.mdp import MDPValidationError, optimal_value_and_policy

    try:
        mdp = build_instance(config.instance.family, config.instance.params)
    except (InstanceParameterError, MDPValidationError) as e:
        raise ConfigValidationError(f"Invalid instance: {e}")
    optimal_value, _ = optimal_value_and_policy(mdp)
    return mdp, optimal_value


def load_config(config_path: Union[str, Path], paper_delta: bool = False,
                environ: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """
    Load and validate an experiment configuration from a JSON file.
    Applies --paper-delta and the GPI_SEED override, then checks every threshold
    against the optimal value of the resolved instance.
    """
    config_path = Path(config_path)
    if not config_path.exists():
        raise ConfigValidationError(f"Config file not found at: {config_path}")

    try:
        with open(config_path, 'r') as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigValidationError(f"Invalid JSON in config file: {str(e)}")

    config = apply_overrides(validate_config(raw), paper_delta=paper_delta, environ=environ)
    _, optimal_value = resolve_instance(config)
    check_thresholds(config, optimal_value)
    return config
