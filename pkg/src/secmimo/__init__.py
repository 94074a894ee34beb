"""Secure massive MIMO downlink under an active pilot-contamination eavesdropper."""

from .asymptotic import ThetaSet, compute_theta_set, secrecy_rate_asymptotic
from .channel import CorrelationSet, SystemConfig, build_scenario, sample_channel_draw
from .downlink import PowerSplit, Scheme, monte_carlo_secrecy_rate, power_split
from .errors import (
    NotApplicableError,
    NumericalError,
    SecMimoError,
    ValidationError,
)
from .nullspace import build_nullspace_context, nullspace_asymptotic_rate
from .power import feasibility_threshold, optimal_power, quadratic_coefficients

__version__ = "0.1.0"

__all__ = [
    "CorrelationSet",
    "NotApplicableError",
    "NumericalError",
    "PowerSplit",
    "Scheme",
    "SecMimoError",
    "SystemConfig",
    "ThetaSet",
    "ValidationError",
    "build_nullspace_context",
    "build_scenario",
    "compute_theta_set",
    "feasibility_threshold",
    "monte_carlo_secrecy_rate",
    "nullspace_asymptotic_rate",
    "optimal_power",
    "power_split",
    "quadratic_coefficients",
    "sample_channel_draw",
    "secrecy_rate_asymptotic",
]
