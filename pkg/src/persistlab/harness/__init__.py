"""Experiment configs, runner, reproduction suites, sweeps and the CLI."""
from .config import ConfigError, ExperimentConfig, load_config
from .runner import ResultRow, run_experiment
from .suites import reproduce, run_suite
from .sweep import sweep

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "ResultRow", "run_experiment",
           "reproduce", "run_suite", "sweep"]
