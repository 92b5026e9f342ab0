"""Command-line experiment runner."""
from .config import SCENARIOS, ConfigError, ExperimentConfig, load_config
from .runner import EXIT_ASSERTION, EXIT_CONFIG, EXIT_IO, EXIT_OK, execute, replay, run

__all__ = [
    "SCENARIOS",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "execute",
    "run",
    "replay",
    "EXIT_OK",
    "EXIT_ASSERTION",
    "EXIT_CONFIG",
    "EXIT_IO",
]
