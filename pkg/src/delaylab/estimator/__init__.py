from .errors import ErrorEstimate, RateFit, fit_rate, strong_error, weak_error
from .properties import PropertyCheck, run_property_suite
from .experiments import (
    ExperimentResult,
    caratheodory_rate_experiment,
    delay_continuity_experiment,
    fit_uncensored,
)

__all__ = [
    "ErrorEstimate", "RateFit", "fit_rate", "strong_error", "weak_error",
    "ExperimentResult", "caratheodory_rate_experiment", "delay_continuity_experiment",
    "fit_uncensored", "PropertyCheck", "run_property_suite",
]
