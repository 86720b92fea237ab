"""Utility-based traffic steering across 5G, Wi-Fi and LiFi, with a factory-floor simulator."""

from .steering import (
    EPSILON_WEIGHT,
    INELIGIBLE,
    MissingTelemetryError,
    NormalizationMaxima,
    ParamThresholds,
    ParamWeights,
    PolicyError,
    SteeringDecision,
    SteeringMode,
    SteeringPolicy,
    TelemetrySample,
    UtilityBreakdown,
    Wat,
    WATS,
    decide_all,
    decide_lb,
    decide_sd,
    decide_user,
    eligibility,
    param_utility,
    round_weights,
    utility_breakdown,
)

__all__ = [
    "EPSILON_WEIGHT",
    "INELIGIBLE",
    "MissingTelemetryError",
    "NormalizationMaxima",
    "ParamThresholds",
    "ParamWeights",
    "PolicyError",
    "SteeringDecision",
    "SteeringMode",
    "SteeringPolicy",
    "TelemetrySample",
    "UtilityBreakdown",
    "Wat",
    "WATS",
    "decide_all",
    "decide_lb",
    "decide_sd",
    "decide_user",
    "eligibility",
    "param_utility",
    "round_weights",
    "utility_breakdown",
]
