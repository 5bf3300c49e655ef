"""Configuration management module"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.errors import ConfigError

# Load environment variables
load_dotenv()

ENV_PREFIX = "ROBUST_RESERVE_"


class Config:
    """Configuration class for the toolkit, backed by config.yaml"""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize configuration

        Args:
            config_path: Path to config.yaml file
        """
        if config_path is None:
            config_path = Path(__file__).parent.parent / "config.yaml"

        self.config_path = Path(config_path)
        self._config: Dict[str, Any] = {}
        self._load_config()
        self._apply_env_overrides()

    def _load_config(self):
        """Load configuration from YAML file"""
        if not self.config_path.exists():
            raise FileNotFoundError(f"Config file not found: {self.config_path}")

        with open(self.config_path, 'r', encoding='utf-8') as f:
            self._config = yaml.safe_load(f) or {}

    def _apply_env_overrides(self):
        """Apply environment variable overrides"""
        for section in ('logging', 'simulation', 'output'):
            self._config.setdefault(section, {})

        if os.getenv(f'{ENV_PREFIX}LOG_LEVEL'):
            self._config['logging']['level'] = os.getenv(f'{ENV_PREFIX}LOG_LEVEL')
        if os.getenv(f'{ENV_PREFIX}LOG_DIR'):
            self._config['logging']['file_path'] = str(
                Path(os.getenv(f'{ENV_PREFIX}LOG_DIR')) / 'robust_reserve.log'
            )

        if os.getenv(f'{ENV_PREFIX}OUTPUT_DIR'):
            self._config['output']['dir'] = os.getenv(f'{ENV_PREFIX}OUTPUT_DIR')

        # Simulation
        if os.getenv(f'{ENV_PREFIX}SEED'):
            self._config['simulation']['seed'] = int(os.getenv(f'{ENV_PREFIX}SEED'))
        if os.getenv(f'{ENV_PREFIX}TRIALS'):
            self._config['simulation']['trials'] = int(os.getenv(f'{ENV_PREFIX}TRIALS'))
        if os.getenv(f'{ENV_PREFIX}PARALLEL_STREAMS'):
            self._config['simulation']['parallel_streams'] = int(
                os.getenv(f'{ENV_PREFIX}PARALLEL_STREAMS')
            )

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get configuration value by key

        Args:
            key: Configuration key (supports dot notation, e.g., 'oracle.value_grid_size')
            default: Default value if key not found

        Returns:
            Configuration value
        """
        keys = key.split('.')
        value = self._config

        for k in keys:
            if isinstance(value, dict) and k in value:
                value = value[k]
            else:
                return default

        return value

    @property
    def logging_config(self) -> Dict[str, Any]:
        """Get logging configuration"""
        return self.get('logging', {})

    @property
    def verification_config(self) -> Dict[str, Any]:
        """Get verification configuration"""
        return self.get('verification', {})

    @property
    def oracle_config(self) -> Dict[str, Any]:
        """Get LP oracle configuration"""
        return self.get('oracle', {})

    @property
    def simulation_config(self) -> Dict[str, Any]:
        """Get Monte Carlo configuration"""
        return self.get('simulation', {})

    @property
    def sweep_config(self) -> Dict[str, Any]:
        """Get sweep configuration"""
        return self.get('sweep', {})

    @property
    def output_config(self) -> Dict[str, Any]:
        """Get output configuration"""
        return self.get('output', {})


# Global config instance
config = Config()


Command = Literal["equilibrium", "verify", "oracle", "simulate", "sweep"]


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI run"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: Command
    means: Optional[List[float]] = None
    m: Optional[float] = None
    n: Optional[int] = Field(default=None, ge=1)

    # verification
    grid_size: int = Field(default=10_000, ge=2)
    samples: int = Field(default=100_000, ge=1)
    support_samples: int = Field(default=1_000, ge=1)
    analytic_tolerance: float = Field(default=1e-9, gt=0)
    slack_tolerance: float = Field(default=1e-9, ge=0)
    projection_tolerance: float = Field(default=1e-12, gt=0)
    with_oracle: bool = False
    oracle_tolerance: float = Field(default=0.02, gt=0)
    perturb_alpha: float = Field(default=0.0, gt=-1.0, lt=1.0)
    workers: int = Field(default=4, ge=1)

    # oracle
    value_grid_size: int = Field(default=51, ge=2)
    reserve_grid_size: int = Field(default=51, ge=2)
    max_bidders: int = Field(default=3, ge=1)
    max_profiles: int = Field(default=40_000, ge=1)
    max_iterations: int = Field(default=100_000, ge=0)
    pivot_tolerance: float = Field(default=1e-9, gt=0)
    refactor_every: int = Field(default=200, ge=1)
    pivot_rule: Literal["bland", "hybrid"] = "hybrid"

    # simulation
    seed: int = 20240611
    trials: int = Field(default=1_000_000, ge=1)
    parallel_streams: int = Field(default=4, ge=1)
    chunk_size: int = Field(default=65_536, ge=1)
    perturbation: float = Field(default=0.01, ge=0)

    # sweep
    n_min: int = Field(default=2, ge=1)
    n_max: int = Field(default=10, ge=1)
    cdf_points: int = Field(default=400, ge=2)
    monte_carlo: bool = False

    out: str = "./results"
    json_stdout: bool = False

    @field_validator("means")
    @classmethod
    def _means_in_unit_interval(cls, value: Optional[List[float]]) -> Optional[List[float]]:
        if value is None:
            return value
        if not value:
            raise ValueError("means must not be empty")
        for mean in value:
            if not 0.0 < mean < 1.0:
                raise ValueError(f"every mean must lie in (0, 1), got {mean}")
        return value

    @field_validator("m")
    @classmethod
    def _m_in_unit_interval(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 < value < 1.0:
            raise ValueError(f"m must lie in (0, 1), got {value}")
        return value

    @model_validator(mode="after")
    def _consistent_with_command(self) -> "RunConfig":
        if self.command == "sweep":
            if self.m is None:
                raise ValueError("sweep needs --m")
            if self.n_min > self.n_max:
                raise ValueError(f"empty n range {self.n_min}..{self.n_max}")
            return self

        if self.means is None and (self.m is None or self.n is None):
            raise ValueError(f"{self.command} needs --means or both --m and --n")
        if self.means is not None and self.m is not None:
            raise ValueError("use either --means or --m/--n, not both")
        return self

    def bidder_means(self) -> List[float]:
        """Means in the order the user gave them"""
        if self.means is not None:
            return list(self.means)
        return [float(self.m)] * int(self.n)

    def oracle_limits(self) -> Dict[str, int]:
        """Size guards of the discretized game"""
        return {"max_bidders": self.max_bidders, "max_profiles": self.max_profiles}

    def solver_options(self) -> Dict[str, Any]:
        """Keyword options for the simplex solver behind the oracle"""
        return {
            "max_iterations": self.max_iterations,
            "tol": self.pivot_tolerance,
            "refactor_every": self.refactor_every,
            "pivot_rule": self.pivot_rule,
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, stamped on every output"""
        payload = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def defaults_from_config(base: Config) -> Dict[str, Any]:
    """Flatten the config.yaml sections into RunConfig keys"""
    verification = base.verification_config
    oracle = base.oracle_config
    simulation = base.simulation_config
    sweep = base.sweep_config

    defaults = {
        "grid_size": verification.get('grid_size'),
        "samples": verification.get('samples'),
        "support_samples": verification.get('support_samples'),
        "analytic_tolerance": verification.get('analytic_tolerance'),
        "slack_tolerance": verification.get('slack_tolerance'),
        "projection_tolerance": verification.get('projection_tolerance'),
        "with_oracle": verification.get('with_oracle'),
        "oracle_tolerance": verification.get('oracle_tolerance'),
        "workers": verification.get('workers'),
        "value_grid_size": oracle.get('value_grid_size'),
        "reserve_grid_size": oracle.get('reserve_grid_size'),
        "max_bidders": oracle.get('max_bidders'),
        "max_profiles": oracle.get('max_profiles'),
        "max_iterations": oracle.get('max_iterations'),
        "pivot_tolerance": oracle.get('pivot_tolerance'),
        "refactor_every": oracle.get('refactor_every'),
        "pivot_rule": oracle.get('pivot_rule'),
        "seed": simulation.get('seed'),
        "trials": simulation.get('trials'),
        "parallel_streams": simulation.get('parallel_streams'),
        "chunk_size": simulation.get('chunk_size'),
        "perturbation": simulation.get('perturbation'),
        "m": sweep.get('m'),
        "n_min": sweep.get('n_min'),
        "n_max": sweep.get('n_max'),
        "cdf_points": sweep.get('cdf_points'),
        "out": base.output_config.get('dir'),
    }
    return {key: value for key, value in defaults.items() if value is not None}


def load_run_config(
    command: str,
    overrides: Optional[Dict[str, Any]] = None,
    config_file: Optional[str] = None,
    base: Optional[Config] = None,
) -> RunConfig:
    """
    Resolve a RunConfig from config.yaml defaults, an optional run file and CLI flags

    Args:
        command: CLI command name
        overrides: Flag values; None entries are ignored
        config_file: Optional YAML file with flat RunConfig keys
        base: Config to take defaults from (global config if None)

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: On unknown keys, unreadable files or inconsistent values
    """
    base = base or config
    values = defaults_from_config(base)

    # The sweep default m only applies to sweeps; elsewhere it would clash with --means.
    if command != "sweep":
        values.pop("m", None)

    if config_file is not None:
        path = Path(config_file)
        if not path.exists():
            raise ConfigError(f"Run config file not found: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                file_values = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"Cannot parse run config {path}: {e}") from e
        if not isinstance(file_values, dict):
            raise ConfigError(f"Run config {path} must be a key-value mapping")
        if "means" in file_values or "m" in file_values:
            values.pop("m", None)
        values.update(file_values)

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key == "means":
            values.pop("m", None)
        values[key] = value

    values["command"] = command
    try:
        return RunConfig(**values)
    except ValidationError as e:
        raise ConfigError(str(e)) from e
