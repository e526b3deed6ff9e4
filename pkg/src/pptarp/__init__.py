"""Partial preamble transmission for the NB-IoT access reservation protocol."""

__version__ = "0.1.0"

from .analytic import (
    AnalyticMetrics,
    calibrate_threshold,
    calibrated_metrics,
    collision_prob,
    false_alarm_prob,
    j_law,
    misdetection_prob,
    occupancy_pmf,
    success_prob,
)
from .core import ConfigError, ContentionResource, SystemConfig, hopping_pattern, validate
from .mcsim import MetricEstimate, SessionOutcome, estimate_metrics, run_session
from .optimizer import OptimizationReport, candidate_repetitions, optimize
from .specfun import GammaLaw, gamma_cdf, inv_reg_upper_gamma, log_gamma, reg_lower_gamma

__all__ = [
    "AnalyticMetrics",
    "ConfigError",
    "ContentionResource",
    "GammaLaw",
    "MetricEstimate",
    "OptimizationReport",
    "SessionOutcome",
    "SystemConfig",
    "calibrate_threshold",
    "calibrated_metrics",
    "candidate_repetitions",
    "collision_prob",
    "estimate_metrics",
    "false_alarm_prob",
    "gamma_cdf",
    "hopping_pattern",
    "inv_reg_upper_gamma",
    "j_law",
    "log_gamma",
    "misdetection_prob",
    "occupancy_pmf",
    "optimize",
    "reg_lower_gamma",
    "run_session",
    "success_prob",
    "validate",
]
