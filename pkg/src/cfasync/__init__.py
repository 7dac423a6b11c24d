"""Downlink spectral efficiency of cell-free massive MIMO under asynchronous reception.

Closed-form SINR/SE evaluation for coherent (DU-MR, DF-MR) and non-coherent
transmission with delay phases and Wiener oscillator phase noise, together
with an independent Monte Carlo estimator of the same use-and-then-forget
bound.
"""

__version__ = "0.1.0"

from .netmodel import (
    ConfigError,
    CorrelationModel,
    NetworkScene,
    PathLossParams,
    SceneConfig,
    generate_scene,
)
from .phase import DelayPhases, PhaseParams, PhasePath
from .chanest import EstimationStats, PilotPlan, assign_pilots, build_stats
from .sedf import SEResult, SEScenario, evaluate
from .mcsim import McConfig, McEstimate, ValidationReport, run_monte_carlo, validate

__all__ = [
    "ConfigError",
    "CorrelationModel",
    "DelayPhases",
    "EstimationStats",
    "McConfig",
    "McEstimate",
    "NetworkScene",
    "PathLossParams",
    "PhaseParams",
    "PhasePath",
    "PilotPlan",
    "SEResult",
    "SEScenario",
    "SceneConfig",
    "ValidationReport",
    "assign_pilots",
    "build_stats",
    "evaluate",
    "generate_scene",
    "run_monte_carlo",
    "validate",
]
