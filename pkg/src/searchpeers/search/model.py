"""Reservation earnings in a McCall model where workers hold subjective offer beliefs.

A worker believes offers arrive with probability ``alpha`` per period and that a
share ``gamma`` of them are part-time. Part-time income is ``theta * w`` and
full-time income is ``w``. Reservation earnings solve

    R = b + beta*alpha/(1-beta) * [(1-gamma) * S_F(R) + gamma * S_P(R)]

with S_F(R) = int_R (w - R) dF and S_P(R) = int_{R/theta} (theta*w - R) dF.
The true arrival rates (alpha*, gamma*) only enter realized outcomes: the
job-finding rate and simulated spells.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..errors import DomainError, SolverError
from .wages import UniformWages, WageDistribution

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 10_000
FD_STEP = 1e-6


@dataclass(frozen=True)
class SearchEnvironment:
    beta: float
    b: float
    theta: float
    wage_dist: WageDistribution = field(default_factory=UniformWages)
    alpha_true: float = 0.5
    gamma_true: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise DomainError(f"beta must lie in (0, 1), got {self.beta}")
        if not 0.0 < self.theta < 1.0:
            raise DomainError(f"theta must lie in (0, 1), got {self.theta}")
        if not 0.0 <= self.alpha_true <= 1.0:
            raise DomainError(f"alpha_true must lie in [0, 1], got {self.alpha_true}")
        if not 0.0 <= self.gamma_true <= 1.0:
            raise DomainError(f"gamma_true must lie in [0, 1], got {self.gamma_true}")
        if not np.isfinite(self.b):
            raise DomainError("b must be finite")

    def with_(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        return {
            "beta": self.beta,
            "b": self.b,
            "theta": self.theta,
            "alpha_true": self.alpha_true,
            "gamma_true": self.gamma_true,
            "wage_dist": self.wage_dist.to_dict(),
        }


@dataclass(frozen=True)
class Beliefs:
    alpha: float
    gamma: float
    group_label: Optional[str] = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"belief alpha must lie in [0, 1], got {self.alpha}")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"belief gamma must lie in [0, 1], got {self.gamma}")

    def to_dict(self):
        return {"alpha": self.alpha, "gamma": self.gamma, "group_label": self.group_label}


@dataclass(frozen=True)
class ReservationPolicy:
    R: float
    w_res_fulltime: float
    w_res_parttime: float
    solver_iterations: int
    residual: float

    def to_dict(self):
        return {
            "R": self.R,
            "w_res_fulltime": self.w_res_fulltime,
            "w_res_parttime": self.w_res_parttime,
            "solver_iterations": self.solver_iterations,
            "residual": self.residual,
        }


def expected_surplus(env, gamma, r):
    """Belief-weighted surplus ``(1-gamma) S_F(r) + gamma S_P(r)``."""
    dist = env.wage_dist
    s_full = dist.surplus(r)
    if gamma == 0.0:
        return s_full
    return (1.0 - gamma) * s_full + gamma * dist.parttime_surplus(r, env.theta)


def acceptance_mass(env, gamma, r):
    """Subjective probability an offer clears ``r``: ``(1-gamma)(1-F(r)) + gamma(1-F(r/theta))``."""
    dist = env.wage_dist
    return (1.0 - gamma) * float(dist.sf(r)) + gamma * float(dist.sf(r / env.theta))


def reservation_map(env, beliefs, r):
    """Right-hand side of the reservation-earnings equation evaluated at ``r``."""
    scale = env.beta * beliefs.alpha / (1.0 - env.beta)
    return env.b + scale * expected_surplus(env, beliefs.gamma, r)


def solve_reservation_earnings(env, beliefs, *, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                               method="newton", damping=None):
    """Solve for reservation earnings by damped fixed-point iteration from ``R0 = b``.

    Parameters
    ----------
    env : SearchEnvironment
    beliefs : Beliefs
    tol : float
        Stop once ``|R_{k+1} - R_k| < tol``.
    max_iter : int
    method : {"newton", "picard"}
        ``"newton"`` damps each step by ``1 / (1 + scale * acceptance_mass(R_k))``,
        i.e. by the inverse slope of ``R - map(R)``. Because the surplus is convex
        in R this converges monotonically from below for every beta < 1.
        ``"picard"`` uses a constant ``damping``; the default ``1 / (1 + scale)``
        is always a contraction, while ``damping=1`` can oscillate when
        ``beta*alpha/(1-beta)`` is large.

    Returns
    -------
    ReservationPolicy

    Raises
    ------
    SolverError
        If the iteration has not converged after ``max_iter`` steps.
    """
    if not isinstance(env, SearchEnvironment) or not isinstance(beliefs, Beliefs):
        raise DomainError("solve_reservation_earnings expects a SearchEnvironment and Beliefs")
    scale = env.beta * beliefs.alpha / (1.0 - env.beta)
    theta = env.theta
    r = float(env.b)
    if scale == 0.0:
        return ReservationPolicy(r, r, r / theta, 0, 0.0)

    if method == "picard":
        omega = 1.0 / (1.0 + scale) if damping is None else float(damping)
        if not 0.0 < omega <= 1.0:
            raise DomainError("damping must lie in (0, 1]")
    elif method != "newton":
        raise DomainError(f"unknown solver method {method!r}")

    for it in range(1, max_iter + 1):
        gap = reservation_map(env, beliefs, r) - r
        if not np.isfinite(gap):
            raise SolverError("reservation map produced a non-finite value", last_iterate=r, iterations=it)
        if method == "newton":
            step = gap / (1.0 + scale * acceptance_mass(env, beliefs.gamma, r))
        else:
            step = omega * gap
        r += step
        if abs(step) < tol:
            residual = abs(reservation_map(env, beliefs, r) - r)
            return ReservationPolicy(r, r, r / theta, it, residual)
    raise SolverError(
        f"reservation earnings did not converge in {max_iter} iterations (last R={r:.12g})",
        last_iterate=r,
        iterations=max_iter,
    )


def reservation_wages(policy, theta):
    """Return ``(full-time, part-time)`` reservation wages ``(R, R/theta)``."""
    if not 0.0 < theta < 1.0:
        raise DomainError(f"theta must lie in (0, 1), got {theta}")
    r = policy.R if isinstance(policy, ReservationPolicy) else float(policy)
    return r, r / theta


def acceptance_probability_parttime(env, beliefs, policy=None):
    """Probability that a part-time offer clears the bar, ``1 - F(R/theta)``."""
    if policy is None:
        policy = solve_reservation_earnings(env, beliefs)
    return float(env.wage_dist.sf(policy.R / env.theta))


def job_finding_rate(env, beliefs, policy=None):
    """Per-period exit probability under the TRUE arrival rates and the belief-based R."""
    if policy is None:
        policy = solve_reservation_earnings(env, beliefs)
    dist = env.wage_dist
    accept_pt = float(dist.sf(policy.R / env.theta))
    accept_ft = float(dist.sf(policy.R))
    return env.alpha_true * (env.gamma_true * accept_pt + (1.0 - env.gamma_true) * accept_ft)


@dataclass(frozen=True)
class ComparativeStatics:
    """Finite-difference and closed-form derivatives of R at one belief point."""

    dR_dalpha: float
    dR_dgamma: float
    analytic_dalpha: float
    analytic_dgamma: float
    R: float

    @property
    def max_relative_gap(self):
        gaps = []
        for fd, an in ((self.dR_dalpha, self.analytic_dalpha), (self.dR_dgamma, self.analytic_dgamma)):
            denom = max(abs(an), 1e-300)
            gaps.append(abs(fd - an) / denom)
        return max(gaps)

    def signs_ok(self):
        return self.dR_dalpha > 0 and self.dR_dgamma < 0 and self.analytic_dalpha > 0 and self.analytic_dgamma < 0

    def to_dict(self):
        return {
            "R": self.R,
            "dR_dalpha": self.dR_dalpha,
            "dR_dgamma": self.dR_dgamma,
            "analytic_dalpha": self.analytic_dalpha,
            "analytic_dgamma": self.analytic_dgamma,
            "max_relative_gap": self.max_relative_gap,
        }


def analytic_derivatives(env, beliefs, r):
    """Implicit-function derivatives of R with respect to alpha and gamma.

    With D = 1 + beta*alpha/(1-beta) * [(1-gamma)(1-F(R)) + gamma(1-F(R/theta))]:

        dR/dalpha = beta/(1-beta) * [(1-gamma) S_F + gamma S_P] / D
        dR/dgamma = -beta*alpha/(1-beta) * (S_F - S_P) / D
    """
    dist = env.wage_dist
    s_full = dist.surplus(r)
    s_part = dist.parttime_surplus(r, env.theta)
    gamma = beliefs.gamma
    scale = env.beta * beliefs.alpha / (1.0 - env.beta)
    denom = 1.0 + scale * acceptance_mass(env, gamma, r)
    d_alpha = env.beta / (1.0 - env.beta) * ((1.0 - gamma) * s_full + gamma * s_part) / denom
    d_gamma = -scale * (s_full - s_part) / denom
    return d_alpha, d_gamma


def comparative_statics(env, beliefs, step=FD_STEP):
    """Central finite differences of R in (alpha, gamma), paired with the closed forms.

    The step is clipped so the perturbed beliefs stay inside [0, 1]; beliefs on
    the boundary have no two-sided neighbourhood and are rejected.
    """
    a, g = beliefs.alpha, beliefs.gamma
    h_a = min(step, a, 1.0 - a)
    h_g = min(step, g, 1.0 - g)
    if h_a <= 0.0 or h_g <= 0.0:
        raise DomainError("comparative statics need interior beliefs (0 < alpha, gamma < 1)")

    def solve_r(alpha, gamma):
        return solve_reservation_earnings(env, Beliefs(alpha, gamma)).R

    fd_alpha = (solve_r(a + h_a, g) - solve_r(a - h_a, g)) / (2.0 * h_a)
    fd_gamma = (solve_r(a, g + h_g) - solve_r(a, g - h_g)) / (2.0 * h_g)
    r = solve_r(a, g)
    an_alpha, an_gamma = analytic_derivatives(env, beliefs, r)
    return ComparativeStatics(fd_alpha, fd_gamma, an_alpha, an_gamma, r)
