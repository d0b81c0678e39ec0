"""
Configuration system for fracstep.

This module defines the tunable parameters of the coefficient engine, the
quadrature oracle, the property suites and the processing layer. Values come
from the defaults below, a JSON/YAML file, or environment variables.
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List

from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)


@dataclass
class CoefficientConfig:
    """Configuration for the a/b/c coefficient engine."""
    cancellation_tol: float = 1e-12  # switch to stable forms above this rounding estimate
    weight_samples_per_step: int = 10  # weight validation samples per time step


@dataclass
class OracleConfig:
    """Configuration for the quadrature oracle."""
    tol: float = 1e-10
    quad_limit: int = 200
    exact_threshold: float = 1e-12  # below this every error counts as rounding
    min_slope: float = 1.9


@dataclass
class PropertyConfig:
    """Configuration for the coefficient and energy-inequality suites."""
    alphas: List[float] = field(default_factory=lambda: [0.1, 0.3, 0.5, 0.7, 0.9])
    decay_rates: List[float] = field(default_factory=lambda: [0.0, 1.0, 2.0, 3.0])
    max_level: int = 512
    random_cases: int = 500
    max_series_len: int = 64
    seed: int = 0
    max_witnesses: int = 5


@dataclass
class ProcessingConfig:
    """Configuration for parallelism, logging and output."""
    jobs: int = 1
    log_level: str = "INFO"
    output_dir: str = "results"
    significant_digits: int = 6


@dataclass
class FracstepConfig:
    """Main configuration class containing all section configurations."""
    coefficients: CoefficientConfig = field(default_factory=CoefficientConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    properties: PropertyConfig = field(default_factory=PropertyConfig)
    processing: ProcessingConfig = field(default_factory=ProcessingConfig)

    @classmethod
    def from_env(cls) -> 'FracstepConfig':
        """Create configuration from environment variables."""
        config = cls()

        if jobs := os.getenv("FRACSTEP_JOBS"):
            try:
                config.processing.jobs = int(jobs)
            except ValueError as e:
                raise ValueError(f"FRACSTEP_JOBS must be an integer, got {jobs!r}") from e

        if log_level := os.getenv("FRACSTEP_LOG_LEVEL"):
            config.processing.log_level = log_level.upper()

        if output_dir := os.getenv("FRACSTEP_OUTPUT_DIR"):
            config.processing.output_dir = output_dir

        if oracle_tol := os.getenv("FRACSTEP_ORACLE_TOL"):
            config.oracle.tol = float(oracle_tol)

        return config

    @classmethod
    def from_file(cls, config_path: str) -> 'FracstepConfig':
        """Load configuration from a JSON or YAML file."""
        config_file = Path(config_path)
        if not config_file.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")

        with open(config_file, 'r') as f:
            if config_path.endswith('.json'):
                config_data = json.load(f)
            elif config_path.endswith(('.yml', '.yaml')):
                import yaml
                try:
                    config_data = yaml.safe_load(f)
                except yaml.YAMLError as e:
                    raise ValueError(f"Invalid YAML in {config_path}: {e}") from e
            else:
                raise ValueError("Configuration file must be JSON (.json) or YAML (.yml/.yaml)")

        return cls.from_dict(config_data)

    @classmethod
    def from_dict(cls, config_dict: Dict[str, Any]) -> 'FracstepConfig':
        """Create configuration from dictionary, ignoring unknown keys."""
        config = cls()

        for section_name, section_config in config_dict.items():
            if hasattr(config, section_name) and isinstance(section_config, dict):
                section_obj = getattr(config, section_name)
                for key, value in section_config.items():
                    if hasattr(section_obj, key):
                        setattr(section_obj, key, value)
                    else:
                        logger.warning(f"Ignoring unknown setting {section_name}.{key}")

        return config

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        return asdict(self)

    def validate(self) -> bool:
        """Validate configuration parameters."""
        if not 0 < self.coefficients.cancellation_tol < 1:
            raise ValueError("cancellation_tol must lie in (0, 1)")

        if self.coefficients.weight_samples_per_step < 1:
            raise ValueError("weight_samples_per_step must be at least 1")

        if self.oracle.tol <= 0:
            raise ValueError("oracle tol must be positive")

        if any(not 0 < a < 1 for a in self.properties.alphas):
            raise ValueError(f"alphas must lie in (0, 1), got {self.properties.alphas}")

        if any(b < 0 for b in self.properties.decay_rates):
            raise ValueError("decay_rates must be non-negative")

        if self.properties.max_level < 2:
            raise ValueError("max_level must be at least 2")

        if self.properties.max_series_len < 2:
            raise ValueError("max_series_len must be at least 2")

        if self.processing.jobs < 1:
            raise ValueError("jobs must be at least 1")

        if not 1 <= self.processing.significant_digits <= 17:
            raise ValueError("significant_digits must lie in [1, 17]")

        return True


# Default configuration instance
DEFAULT_CONFIG = FracstepConfig()


def get_config() -> FracstepConfig:
    """
    Get configuration instance.

    Priority order:
    1. Configuration file (if FRACSTEP_CONFIG_FILE is set)
    2. Environment variables
    3. Default configuration
    """
    config_file = os.getenv("FRACSTEP_CONFIG_FILE")

    if config_file:
        try:
            config = FracstepConfig.from_file(config_file)
        except (FileNotFoundError, ValueError) as e:
            logger.warning(f"Could not load config file {config_file}: {e}")
            config = FracstepConfig.from_env()
    else:
        config = FracstepConfig.from_env()

    config.validate()

    return config
