"""Imputation of zero-inflated survey variables.

Thin Python layer over the C++ library. Missing values of ``y`` may be passed
as NaN when building a :class:`SampleFrame`.
"""

import json as _json

from ._core import (
    ConvergenceError,
    DesignError,
    EmptyPoolError,
    Error,
    FittedModel,
    ImputationResult,
    Method,
    SampleFrame,
    SeparationError,
    SingularMatrixError,
    ValidationError,
    completed_values,
    estimate_variance,
    fit_model,
    imputed_cdf,
    imputed_total,
    impute,
    parse_method,
    read_sample_csv,
)
from ._core import run_application_scenario as _run_application_scenario
from ._core import run_monte_carlo as _run_monte_carlo

__version__ = "0.1.0"


def run_monte_carlo(config=None, r_squared=0.5, phi_bar=0.7, p_bar=0.5):
    """One simulation scenario; ``config`` uses the keys of the CLI config file."""
    return _run_monte_carlo(_json.dumps(config or {}), r_squared, phi_bar, p_bar)


def run_application_scenario(config=None):
    """Synthetic stratified survey; ``config`` must then contain ``strata``."""
    return _run_application_scenario("" if config is None else _json.dumps(config))
