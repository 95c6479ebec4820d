import math
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from searchpeers import DomainError, SolverError, SpellTruncationError
from searchpeers.search import (
    Beliefs,
    SearchEnvironment,
    TruncatedLognormalWages,
    UniformWages,
    acceptance_probability_parttime,
    analytic_derivatives,
    belief_gap_experiment,
    comparative_statics,
    comparative_statics_sweep,
    job_finding_rate,
    oracle_comparison,
    pseudo_survey,
    reservation_map,
    reservation_wages,
    simulate_spells,
    solve_reservation_earnings,
    table9_beliefs,
    value_iteration_reservation,
    wage_distribution_from_dict,
)

# gamma = 0 on uniform[0,1] with beta=0.9, b=0: 4.5 R^2 - 10 R + 4.5 = 0
R_QUAD = (10.0 - math.sqrt(19.0)) / 9.0
R_QUAD_FROZEN = 0.6267890062732585
LAMBDA_FROZEN = 0.111963298118


def quad_env(**kw):
    base = dict(beta=0.9, b=0.0, theta=0.5, alpha_true=0.6, gamma_true=0.5)
    base.update(kw)
    return SearchEnvironment(**base)


def default_env():
    return SearchEnvironment(beta=0.95, b=0.2, theta=0.7, alpha_true=0.34, gamma_true=0.54)


# -- anchors -------------------------------------------------------------------

def test_quadratic_root_matches_closed_form():
    pol = solve_reservation_earnings(quad_env(), Beliefs(1.0, 0.0))
    assert R_QUAD == pytest.approx(R_QUAD_FROZEN, abs=1e-15)
    assert pol.R == pytest.approx(R_QUAD, abs=1e-10)
    assert 4.5 * pol.R ** 2 - 10 * pol.R + 4.5 == pytest.approx(0.0, abs=1e-9)


def test_quadratic_root_matches_value_iteration():
    r_vi, _ = value_iteration_reservation(quad_env(), Beliefs(1.0, 0.0))
    assert r_vi == pytest.approx(R_QUAD, abs=1e-4)


def test_oracle_at_interior_point():
    env = SearchEnvironment(beta=0.95, b=0.2, theta=0.5)
    bel = Beliefs(0.5, 0.5)
    r_vi, _ = value_iteration_reservation(env, bel)
    assert solve_reservation_earnings(env, bel).R == pytest.approx(r_vi, abs=1e-4)


@pytest.mark.parametrize("env,bel", [
    (SearchEnvironment(beta=0.95, b=0.3, theta=0.5), Beliefs(0.0, 0.4)),
    (SearchEnvironment(beta=1e-12, b=0.3, theta=0.5), Beliefs(0.7, 0.4)),
    (SearchEnvironment(beta=0.5, b=-0.1, theta=0.5), Beliefs(0.0, 1.0)),
])
def test_trivial_anchor_returns_b(env, bel):
    assert solve_reservation_earnings(env, bel).R == pytest.approx(env.b, abs=1e-9)


def test_lambda_for_quadratic_environment():
    lam = job_finding_rate(quad_env(), Beliefs(1.0, 0.0))
    assert lam == pytest.approx(0.6 * 0.5 * (1 - R_QUAD), abs=1e-12)
    assert lam == pytest.approx(LAMBDA_FROZEN, abs=1e-11)


def test_lambda_edges():
    # b >= w_max: nothing acceptable
    assert job_finding_rate(quad_env(b=1.2), Beliefs(0.5, 0.5)) == 0.0
    # R <= theta * w_min: every offer accepted
    env = quad_env(b=0.0)
    assert job_finding_rate(env, Beliefs(0.0, 0.5)) == pytest.approx(env.alpha_true)


def test_reservation_wages():
    assert reservation_wages(0.6, 0.5) == pytest.approx((0.6, 1.2))
    assert reservation_wages(0.0, 0.9) == (0.0, 0.0)
    pol = solve_reservation_earnings(quad_env(), Beliefs(1.0, 0.0))
    w_full, w_part = reservation_wages(pol, 0.5)
    assert w_part == pytest.approx(2 * R_QUAD)
    assert w_part > 1.0  # every part-time offer on [0, 1] is rejected
    assert acceptance_probability_parttime(quad_env(), Beliefs(1.0, 0.0)) == 0.0
    with pytest.raises(DomainError):
        reservation_wages(0.5, 1.0)


def test_acceptance_edges():
    assert acceptance_probability_parttime(quad_env(b=0.9), Beliefs(0.5, 0.5)) == 0.0
    assert acceptance_probability_parttime(quad_env(b=0.0), Beliefs(0.0, 0.5)) == 1.0


# -- solver --------------------------------------------------------------------

def test_picard_undamped_fails_where_newton_converges():
    env = SearchEnvironment(beta=0.99, b=0.0, theta=0.5)
    bel = Beliefs(0.9, 0.3)
    pol = solve_reservation_earnings(env, bel)
    assert abs(reservation_map(env, bel, pol.R) - pol.R) < 1e-9
    with pytest.raises(SolverError):
        solve_reservation_earnings(env, bel, method="picard", damping=1.0, max_iter=2000)
    damped = solve_reservation_earnings(env, bel, method="picard", max_iter=200_000)
    assert damped.R == pytest.approx(pol.R, abs=1e-8)


def test_solver_rejects_bad_inputs():
    with pytest.raises(DomainError):
        SearchEnvironment(beta=1.0, b=0.0, theta=0.5)
    with pytest.raises(DomainError):
        Beliefs(1.2, 0.5)
    with pytest.raises(DomainError):
        solve_reservation_earnings(quad_env(), Beliefs(0.5, 0.5), method="bisect")


def test_anchor_solve_is_fast():
    env, bel = quad_env(b=0.25), Beliefs(0.0, 0.5)
    t0 = time.perf_counter()
    for _ in range(1000):
        solve_reservation_earnings(env, bel)
    assert (time.perf_counter() - t0) / 1000 < 1e-3


# -- oracle and comparative statics -------------------------------------------

def test_oracle_equivalence_on_random_environments():
    t0 = time.perf_counter()
    table = oracle_comparison(20)
    assert time.perf_counter() - t0 < 10
    assert len(table) == 20
    assert table["abs_gap"].max() <= 1e-4


def test_oracle_handles_lognormal():
    env = SearchEnvironment(beta=0.9, b=0.1, theta=0.6, wage_dist=TruncatedLognormalWages())
    bel = Beliefs(0.5, 0.4)
    r_vi, _ = value_iteration_reservation(env, bel)
    assert solve_reservation_earnings(env, bel).R == pytest.approx(r_vi, abs=1e-4)


def test_derivatives_match_at_reference_point():
    cs = comparative_statics(SearchEnvironment(beta=0.95, b=0.2, theta=0.5), Beliefs(0.5, 0.5))
    assert cs.max_relative_gap <= 1e-4
    assert cs.signs_ok()


def test_dgamma_vanishes_as_alpha_goes_to_zero():
    env = SearchEnvironment(beta=0.95, b=0.2, theta=0.5)
    _, dg = analytic_derivatives(env, Beliefs(1e-9, 0.5), env.b)
    assert abs(dg) < 1e-7


def test_comparative_statics_needs_interior_beliefs():
    with pytest.raises(DomainError):
        comparative_statics(quad_env(), Beliefs(1.0, 0.5))


def test_full_sweep_grid():
    table = comparative_statics_sweep(default_env())
    assert len(table) == 729
    assert table["max_relative_gap"].max() <= 1e-4
    assert table["signs_ok"].all()


# -- properties ----------------------------------------------------------------

env_params = st.fixed_dictionaries({
    "beta": st.floats(0.05, 0.99),
    "b": st.floats(-0.5, 1.2),
    "theta": st.floats(0.05, 0.95),
})
interior = st.floats(0.02, 0.98)


@settings(max_examples=150, deadline=None)
@given(env_params, interior, interior)
def test_fixed_point_residual(p, alpha, gamma):
    env, bel = SearchEnvironment(**p), Beliefs(alpha, gamma)
    pol = solve_reservation_earnings(env, bel)
    assert abs(reservation_map(env, bel, pol.R) - pol.R) < 1e-8
    assert pol.R >= env.b - 1e-12


@settings(max_examples=100, deadline=None)
@given(env_params, interior, interior, st.floats(0.0, 0.5))
def test_reservation_weakly_increasing_in_b(p, alpha, gamma, db):
    env, bel = SearchEnvironment(**p), Beliefs(alpha, gamma)
    r0 = solve_reservation_earnings(env, bel).R
    r1 = solve_reservation_earnings(env.with_(b=env.b + db), bel).R
    assert r1 >= r0 - 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.5, 1.5), st.floats(0.05, 0.95))
def test_fulltime_surplus_dominates(r, theta):
    for dist in (UniformWages(), TruncatedLognormalWages()):
        assert dist.surplus(r) >= dist.parttime_surplus(r, theta) - 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(-1.0, 3.0), st.floats(-1.0, 1.0), st.floats(0.1, 2.0))
def test_uniform_closed_form_equals_quadrature(r, lo, width):
    dist = UniformWages(lo, lo + width)
    assert dist.surplus(r) == pytest.approx(dist.surplus_quadrature(r), abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 2.0))
def test_lognormal_quadrature_against_partial_expectation(r):
    dist = TruncatedLognormalWages()
    exact = dist.partial_expectation(r) - max(r, dist.support_min) * float(dist.sf(r))
    if r < dist.support_min:
        exact += dist.support_min - r
    assert dist.surplus(r) == pytest.approx(exact, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(0.1, 0.9), st.floats(0.3, 0.95), st.floats(0.3, 0.9))
def test_derivative_signs(alpha, gamma, beta, theta):
    env = SearchEnvironment(beta=beta, b=0.1, theta=theta)
    cs = comparative_statics(env, Beliefs(alpha, gamma))
    assert cs.signs_ok()
    assert cs.max_relative_gap <= 1e-4


# -- simulation ----------------------------------------------------------------

def test_geometric_spells_when_everything_is_accepted():
    env = quad_env(b=0.0, alpha_true=0.5)
    sample = simulate_spells(env, Beliefs(0.0, 0.5), 100_000, seed=11)
    p = env.alpha_true
    se = math.sqrt(1 - p) / p / math.sqrt(len(sample))
    assert abs(sample.duration.mean() - 1 / p) <= 3 * se


def test_hazard_matches_lambda():
    env, bel = quad_env(), Beliefs(1.0, 0.0)
    t0 = time.perf_counter()
    sample = simulate_spells(env, bel, 100_000, seed=3)
    assert time.perf_counter() - t0 < 5
    hazard, se = sample.exit_hazard()
    assert abs(hazard - LAMBDA_FROZEN) <= 3 * se
    assert not sample.parttime.any()  # part-time bar exceeds the support


def test_zero_hazard_is_refused():
    with pytest.raises(SpellTruncationError):
        simulate_spells(quad_env(b=1.5), Beliefs(0.5, 0.5), 10, seed=1)


def test_truncation_guard():
    env = quad_env(alpha_true=0.01)
    with pytest.raises(SpellTruncationError):
        simulate_spells(env, Beliefs(0.5, 0.5), 1000, seed=1, max_duration=5)


def test_spells_independent_of_threads():
    env, bel = default_env(), table9_beliefs()[0]
    a = simulate_spells(env, bel, 25_000, seed=5, threads=1)
    b = simulate_spells(env, bel, 25_000, seed=5, threads=3)
    np.testing.assert_array_equal(a.duration, b.duration)
    np.testing.assert_array_equal(a.income, b.income)
    rec = next(iter(a))
    assert rec.accepted_type in ("full-time", "part-time") and rec.income >= a.reservation_earnings


def test_spells_need_seed():
    with pytest.raises(DomainError):
        simulate_spells(default_env(), Beliefs(0.3, 0.5), 10, seed=None)


# -- belief gap and pseudo-survey -----------------------------------------------

def test_table9_mapping():
    low, high = table9_beliefs()
    assert (low.alpha, low.gamma) == pytest.approx((0.3206, 0.5764))
    assert (high.alpha, high.gamma) == pytest.approx((0.3524, 0.5119))


def test_belief_gap_orderings():
    rep = belief_gap_experiment(default_env(), *table9_beliefs())
    assert rep.R_L < rep.R_H
    assert rep.lambda_L > rep.lambda_H
    assert rep.accept_pt_L > rep.accept_pt_H
    assert rep.all_orderings_hold()


def test_belief_gap_precondition():
    low, _ = table9_beliefs()
    with pytest.raises(DomainError):
        belief_gap_experiment(default_env(), low, low)


def test_belief_gap_over_sweep():
    # acceptance(L) > acceptance(H) whenever L is pessimistic on both margins
    rng = np.random.default_rng(0)
    for _ in range(50):
        env = SearchEnvironment(beta=rng.uniform(0.6, 0.97), b=rng.uniform(0.0, 0.3), theta=rng.uniform(0.4, 0.9))
        a_l, g_h = rng.uniform(0.1, 0.6, 2)
        low = Beliefs(a_l, g_h + rng.uniform(0.05, 0.3))
        high = Beliefs(a_l + rng.uniform(0.05, 0.3), g_h)
        rep = belief_gap_experiment(env, low, high)
        assert rep.R_L < rep.R_H
        assert rep.accept_pt_L >= rep.accept_pt_H


def test_pseudo_survey_deterministic():
    a = pseudo_survey(default_env(), 200, seed=4)
    b = pseudo_survey(default_env(), 200, seed=4)
    assert a.equals(b)
    assert a["accept_pct"].between(0, 100).all()


def test_wage_config():
    assert isinstance(wage_distribution_from_dict({"family": "uniform"}), UniformWages)
    assert isinstance(wage_distribution_from_dict({"family": "lognormal", "sigma": 0.4}), TruncatedLognormalWages)
    with pytest.raises(DomainError):
        wage_distribution_from_dict({"family": "pareto"})
