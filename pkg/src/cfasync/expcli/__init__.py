"""Experiment runner and command-line interface."""

from .config import ExperimentConfig, default_config, load_config
from .experiments import (
    FigureData,
    make_scenario,
    make_scene,
    run_nmse_sweep,
    run_phase_grid,
    run_se_cdf,
    run_sum_se_sweep,
    run_validation,
)

__all__ = [
    "ExperimentConfig",
    "FigureData",
    "default_config",
    "load_config",
    "make_scenario",
    "make_scene",
    "run_nmse_sweep",
    "run_phase_grid",
    "run_se_cdf",
    "run_sum_se_sweep",
    "run_validation",
]
