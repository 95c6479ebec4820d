"""McCall job search with subjective beliefs about offer arrival and composition."""

from .experiments import (
    BeliefGapReport,
    belief_gap_experiment,
    comparative_statics_sweep,
    oracle_comparison,
    pseudo_survey,
    random_environments,
    table9_beliefs,
)
from .model import (
    Beliefs,
    ComparativeStatics,
    ReservationPolicy,
    SearchEnvironment,
    acceptance_probability_parttime,
    analytic_derivatives,
    comparative_statics,
    job_finding_rate,
    reservation_map,
    reservation_wages,
    solve_reservation_earnings,
)
from .oracle import value_iteration_reservation
from .simulate import SpellOutcome, SpellSample, simulate_spells
from .wages import TruncatedLognormalWages, UniformWages, WageDistribution, wage_distribution_from_dict

__all__ = [
    "BeliefGapReport",
    "Beliefs",
    "ComparativeStatics",
    "ReservationPolicy",
    "SearchEnvironment",
    "SpellOutcome",
    "SpellSample",
    "TruncatedLognormalWages",
    "UniformWages",
    "WageDistribution",
    "acceptance_probability_parttime",
    "analytic_derivatives",
    "belief_gap_experiment",
    "comparative_statics",
    "comparative_statics_sweep",
    "job_finding_rate",
    "oracle_comparison",
    "pseudo_survey",
    "random_environments",
    "reservation_map",
    "reservation_wages",
    "simulate_spells",
    "solve_reservation_earnings",
    "table9_beliefs",
    "value_iteration_reservation",
    "wage_distribution_from_dict",
]
