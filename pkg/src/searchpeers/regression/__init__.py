"""Fixed-effects least squares, balance checks and randomization inference."""

from .core import FitResult, Specification, design, estimate, fit, simple_ols, wald_test
from .suites import (
    LABOR_OUTCOMES,
    PREDETERMINED,
    BalanceReport,
    RandomizationResult,
    balance_suite,
    baseline_spec,
    gender_gap,
    randomization_inference,
    replicate,
    with_exposures,
)

__all__ = [
    "LABOR_OUTCOMES",
    "PREDETERMINED",
    "BalanceReport",
    "FitResult",
    "RandomizationResult",
    "Specification",
    "balance_suite",
    "baseline_spec",
    "design",
    "estimate",
    "fit",
    "gender_gap",
    "randomization_inference",
    "replicate",
    "simple_ols",
    "wald_test",
    "with_exposures",
]
