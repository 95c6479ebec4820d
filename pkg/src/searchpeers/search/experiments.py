"""Belief-gap comparisons, comparative-statics sweeps and model-generated pseudo-surveys."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import DomainError
from ..seeding import domain_sequence
from .model import (
    Beliefs,
    acceptance_probability_parttime,
    comparative_statics,
    job_finding_rate,
    SearchEnvironment,
    solve_reservation_earnings,
)
from .oracle import value_iteration_reservation

# Survey answers: expected offers out of 10 applications, and % part-time offers.
TABLE9_EXPECTED_OFFERS = {"L": 3.206, "H": 3.524}
TABLE9_PARTTIME_PCT = {"L": 57.64, "H": 51.19}
TABLE9_ACCEPT_PCT = {"L": 67.43, "H": 60.39}
APPLICATIONS_PER_PERIOD = 10

SWEEP_GRID = {
    "alpha": [round(0.1 * i, 1) for i in range(1, 10)],
    "gamma": [round(0.1 * i, 1) for i in range(1, 10)],
    "beta": [0.5, 0.9, 0.99],
    "theta": [0.3, 0.5, 0.8],
}


def table9_beliefs():
    """Map the baseline survey answers to per-period beliefs (offers / 10 applications)."""
    return tuple(
        Beliefs(
            alpha=TABLE9_EXPECTED_OFFERS[g] / APPLICATIONS_PER_PERIOD,
            gamma=TABLE9_PARTTIME_PCT[g] / 100.0,
            group_label=g,
        )
        for g in ("L", "H")
    )


@dataclass(frozen=True)
class BeliefGapReport:
    R_L: float
    R_H: float
    lambda_L: float
    lambda_H: float
    accept_pt_L: float
    accept_pt_H: float
    beliefs_L: Beliefs
    beliefs_H: Beliefs

    @property
    def orderings(self):
        return {
            "R_L_below_R_H": self.R_L < self.R_H,
            "lambda_L_above_lambda_H": self.lambda_L > self.lambda_H,
            "accept_pt_L_above_accept_pt_H": self.accept_pt_L > self.accept_pt_H,
        }

    def all_orderings_hold(self):
        return all(self.orderings.values())

    def to_dict(self):
        return {
            "R_L": self.R_L,
            "R_H": self.R_H,
            "lambda_L": self.lambda_L,
            "lambda_H": self.lambda_H,
            "accept_pt_L": self.accept_pt_L,
            "accept_pt_H": self.accept_pt_H,
            "beliefs_L": self.beliefs_L.to_dict(),
            "beliefs_H": self.beliefs_H.to_dict(),
            "orderings": self.orderings,
            "published_accept_pct": dict(TABLE9_ACCEPT_PCT),
            "alpha_mapping": f"alpha = expected offers / {APPLICATIONS_PER_PERIOD} applications",
        }


def belief_gap_experiment(env, beliefs_L, beliefs_H):
    """Solve both groups on the same environment and compare R, lambda and part-time acceptance.

    Requires the low-FLFP group to be more pessimistic on both margins:
    ``alpha_L < alpha_H`` and ``gamma_L > gamma_H``.
    """
    if not (beliefs_L.alpha < beliefs_H.alpha and beliefs_L.gamma > beliefs_H.gamma):
        raise DomainError("belief gap needs alpha_L < alpha_H and gamma_L > gamma_H")
    out = {}
    for tag, bel in (("L", beliefs_L), ("H", beliefs_H)):
        pol = solve_reservation_earnings(env, bel)
        out[tag] = (pol.R, job_finding_rate(env, bel, pol), acceptance_probability_parttime(env, bel, pol))
    return BeliefGapReport(
        R_L=out["L"][0], R_H=out["H"][0],
        lambda_L=out["L"][1], lambda_H=out["H"][1],
        accept_pt_L=out["L"][2], accept_pt_H=out["H"][2],
        beliefs_L=beliefs_L, beliefs_H=beliefs_H,
    )


def comparative_statics_sweep(env, grid=None):
    """Evaluate derivatives over the Cartesian belief/parameter grid; one row per point."""
    grid = grid or SWEEP_GRID
    rows = []
    for beta, theta in itertools.product(grid["beta"], grid["theta"]):
        point_env = env.with_(beta=beta, theta=theta)
        for alpha, gamma in itertools.product(grid["alpha"], grid["gamma"]):
            cs = comparative_statics(point_env, Beliefs(alpha, gamma))
            rows.append({
                "beta": beta, "theta": theta, "alpha": alpha, "gamma": gamma,
                **cs.to_dict(),
                "signs_ok": cs.signs_ok(),
            })
    return pd.DataFrame(rows)


def random_environments(n, seed):
    """``n`` environments and belief points drawn over economically sensible ranges (uniform F)."""
    rng = np.random.default_rng(domain_sequence(seed, "oracle"))
    out = []
    for _ in range(n):
        env = SearchEnvironment(beta=rng.uniform(0.5, 0.97), b=rng.uniform(0.0, 0.5), theta=rng.uniform(0.3, 0.9))
        out.append((env, Beliefs(rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95))))
    return out


def oracle_comparison(n=20, seed=20240917):
    """Fixed-point R against value iteration on ``n`` random environments; one row each."""
    rows = []
    for env, bel in random_environments(n, seed):
        r = solve_reservation_earnings(env, bel).R
        r_vi, iters = value_iteration_reservation(env, bel)
        rows.append({"beta": env.beta, "b": env.b, "theta": env.theta, "alpha": bel.alpha, "gamma": bel.gamma,
                     "R": r, "R_oracle": r_vi, "abs_gap": abs(r - r_vi), "oracle_iterations": iters})
    return pd.DataFrame(rows)


def pseudo_survey(env, n, seed, *, noise_sd=15.0, n_fields=10, field_gamma_sd=0.08,
                  alpha_mean=0.34, alpha_sd=0.17, gamma_mean=0.54, gamma_sd=0.23):
    """Simulate survey respondents whose stated acceptance follows the model plus noise.

    Beliefs are Beta-distributed (moments in probability units); fields shift the
    part-time belief so field fixed effects load on it. Stated acceptance is
    ``100 * (1 - F(R/theta))`` plus Gaussian noise, clipped to [0, 100].
    """
    rng = np.random.default_rng(domain_sequence(seed, "survey"))
    field = rng.integers(0, n_fields, size=n)
    field_shift = rng.normal(0.0, field_gamma_sd, size=n_fields)
    alpha = _beta_draws(rng, alpha_mean, alpha_sd, n)
    gamma = np.clip(_beta_draws(rng, gamma_mean, gamma_sd, n) + field_shift[field], 0.0, 1.0)
    accept = np.array([
        100.0 * acceptance_probability_parttime(env, Beliefs(float(a), float(g)))
        for a, g in zip(alpha, gamma)
    ])
    stated = np.clip(accept + rng.normal(0.0, noise_sd, size=n), 0.0, 100.0)
    return pd.DataFrame({
        "respondent": np.arange(n),
        "field": field,
        "alpha_pct": 100.0 * alpha,
        "gamma_pct": 100.0 * gamma,
        "model_accept_pct": accept,
        "accept_pct": stated,
    })


def _beta_draws(rng, mean, sd, n):
    common = mean * (1.0 - mean) / sd ** 2 - 1.0
    if common <= 0:
        raise DomainError("requested Beta moments are infeasible")
    return rng.beta(mean * common, (1.0 - mean) * common, size=n)
