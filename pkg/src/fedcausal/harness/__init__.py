"""Experiment harness and command line interface."""

from .config import ALGORITHM_IDS, ConfigError, ExperimentConfig, HeterogeneityConfig, load_config
from .experiment import (
    ExperimentError,
    ExperimentResult,
    RunResult,
    dropout_experiment,
    emit_results,
    run_experiment,
    sachs_truth,
    synthesize,
)

__all__ = [
    "ALGORITHM_IDS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentResult",
    "HeterogeneityConfig",
    "RunResult",
    "dropout_experiment",
    "emit_results",
    "load_config",
    "run_experiment",
    "sachs_truth",
    "synthesize",
]
