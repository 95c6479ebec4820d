import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from searchpeers import CollinearityError, DataContractError, DomainError
from searchpeers.fe import FixedEffect, absorb, drop_singletons
from searchpeers.peer_metrics import compute_exposures
from searchpeers.regression import (
    Specification,
    balance_suite,
    baseline_spec,
    estimate,
    fit,
    gender_gap,
    randomization_inference,
    replicate,
    simple_ols,
    wald_test,
)
from searchpeers.search import SearchEnvironment, pseudo_survey
from searchpeers.synth import DgpSpec, OutcomeEffects, generate_panel

from conftest import small_calibration

NULL = DgpSpec(effects={o: OutcomeEffects() for o in ("log_weekly_hours", "fulltime", "log_hourly_wage")})


def dummy_ols(y, X, groups, slope_group=None, t=None):
    """Explicit dummy-variable least squares; returns the coefficients on X."""
    cols = [X]
    for j, g in enumerate(groups):
        codes = pd.factorize(g, sort=True)[0]
        D = np.eye(codes.max() + 1)[codes]
        cols.append(D if j == 0 else D[:, 1:])
    if slope_group is not None:
        codes = pd.factorize(slope_group, sort=True)[0]
        cols.append(np.eye(codes.max() + 1)[codes] * t[:, None])
    Z = np.column_stack(cols)
    beta = np.linalg.lstsq(Z, y, rcond=None)[0]
    return beta[:X.shape[1]]


# -- core estimator ----------------------------------------------------------

def test_one_dimension_hand_example():
    g = np.array([0, 0, 0, 1, 1, 1])
    x = np.array([1.0, 2.0, 3.0, 2.0, 4.0, 9.0])
    y = np.array([2.0, 3.0, 7.0, 1.0, 2.0, 8.0])
    res = estimate(y, x[:, None], ["x"], [FixedEffect.from_labels(g)], vcov="HC1")
    xd = x - np.array([2, 2, 2, 5, 5, 5])
    yd = y - np.array([4, 4, 4, 11 / 3, 11 / 3, 11 / 3])
    assert res["x"] == pytest.approx((xd @ yd) / (xd @ xd), abs=1e-12)


def test_three_by_two_toy_against_dummies():
    df = pd.DataFrame({
        "degree_id": [1, 1, 2, 2, 3, 3, 1, 2, 3, 3],
        "cohort": [1, 2, 1, 2, 1, 2, 1, 2, 2, 1],
        "t1": [0.3, 1.2, -0.5, 2.2, 0.9, -1.1, 0.4, 1.7, -0.2, 0.8],
        "t2": [1.0, -0.7, 0.2, 0.5, -1.3, 0.6, 2.1, -0.4, 0.9, 0.1],
    })
    df["y"] = 0.5 * df.t1 - 0.8 * df.t2 + np.sin(np.arange(10)) + df.degree_id
    spec = Specification(outcome="y", treatments=("t1", "t2"), controls=(), cluster=None, vcov="HC1",
                         standardize=())
    res = fit(df, spec)
    oracle = dummy_ols(df.y.to_numpy(), df[["t1", "t2"]].to_numpy(), [df.degree_id, df.cohort])
    np.testing.assert_allclose(res.coef, oracle, atol=1e-8)


@st.composite
def small_instance(draw):
    n = draw(st.integers(12, 60))
    n_deg = draw(st.integers(2, 6))
    n_coh = draw(st.integers(2, 4))
    k = draw(st.integers(1, 3))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    trend = draw(st.booleans())
    rng = np.random.default_rng(seed)
    deg = np.concatenate([np.arange(n_deg), rng.integers(0, n_deg, n - n_deg)])
    coh = np.concatenate([np.arange(n_coh), rng.integers(0, n_coh, n - n_coh)])
    X = rng.normal(size=(n, k)) + 0.3 * deg[:, None]
    y = X @ rng.normal(size=k) + 0.5 * deg - 0.2 * coh + rng.normal(size=n)
    return y, X, deg, coh, trend


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_instance())
def test_fwl_matches_dummy_regression(inst):
    y, X, deg, coh, trend = inst
    t = coh.astype(float)
    names = [f"x{j}" for j in range(X.shape[1])]
    fes = [FixedEffect.from_labels(deg, slope=t if trend else None), FixedEffect.from_labels(coh)]
    oracle = dummy_ols(y, X, [deg, coh], slope_group=deg if trend else None, t=t)
    Z = np.column_stack([X, np.eye(deg.max() + 1)[deg], np.eye(coh.max() + 1)[coh][:, 1:]]
                        + ([np.eye(deg.max() + 1)[deg] * t[:, None]] if trend else []))
    if np.linalg.matrix_rank(Z) < Z.shape[1] - (deg.max() + 1 if trend else 0) or \
            np.linalg.matrix_rank(Z) < np.linalg.matrix_rank(Z[:, X.shape[1]:]) + X.shape[1]:
        return  # treatments not identified against the dummies
    try:
        res = estimate(y, X, names, fes, vcov="classical")
    except (CollinearityError, DataContractError):
        return
    np.testing.assert_allclose(res.coef, oracle, atol=1e-8, rtol=0)


@settings(max_examples=1000, deadline=None)
@given(small_instance(), st.floats(1e-3, 1e3))
def test_standardization_invariance(inst, scale):
    y, X, deg, coh, _ = inst
    df = pd.DataFrame({"y": y, "x": X[:, 0], "degree_id": deg, "cohort": coh, "g": np.arange(len(y)) % 7})
    spec = Specification(outcome="y", treatments=("x",), controls=(), cluster="g", standardize=("x",))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = fit(df, spec)
            b = fit(df.assign(x=df.x * scale), spec)
    except (CollinearityError, DataContractError):
        return
    assert abs(a["x"] - b["x"]) <= 1e-10
    assert abs(a.tstat[0] - b.tstat[0]) <= 1e-10 * max(1.0, abs(a.tstat[0]))


def test_cr1_equals_hc1_with_singleton_clusters():
    rng = np.random.default_rng(0)
    n = 200
    df = pd.DataFrame({"degree_id": rng.integers(0, 10, n), "cohort": rng.integers(0, 4, n),
                       "x": rng.normal(size=n), "z": rng.normal(size=n), "id": np.arange(n)})
    df["y"] = df.x + rng.normal(size=n) * (1 + df.x.abs())
    base = Specification(outcome="y", treatments=("x",), controls=("z",), standardize=())
    cr1 = fit(df, base.with_(cluster="id"))
    hc1 = fit(df, base.with_(cluster=None, vcov="HC1"))
    np.testing.assert_allclose(cr1.cov, hc1.cov, rtol=1e-10)
    np.testing.assert_allclose(cr1.coef, hc1.coef)


def test_covariance_is_symmetric_psd(small_panel):
    res = fit(small_panel, baseline_spec())
    np.testing.assert_array_equal(res.cov, res.cov.T)
    assert np.linalg.eigvalsh(res.cov).min() >= -1e-14
    np.testing.assert_allclose(res.se, np.sqrt(np.diag(res.cov)))


def test_cr1_against_hand_sandwich():
    rng = np.random.default_rng(3)
    n, G = 120, 12
    g = np.repeat(np.arange(G), n // G)
    x = rng.normal(size=n)
    y = 1 + 2 * x + rng.normal(size=n) + rng.normal(size=G)[g]
    res = estimate(y, x[:, None], ["x"], cluster=g, vcov="CR1")
    X = np.column_stack([np.ones(n), x])
    b = np.linalg.solve(X.T @ X, X.T @ y)
    e = y - X @ b
    bread = np.linalg.inv(X.T @ X)
    meat = sum(np.outer(X[g == c].T @ e[g == c], X[g == c].T @ e[g == c]) for c in range(G))
    V = G / (G - 1) * (n - 1) / (n - 2) * bread @ meat @ bread
    np.testing.assert_allclose(res.cov, V, rtol=1e-12)
    assert res.df_inference == G - 1


def test_collinear_treatment_is_named():
    rng = np.random.default_rng(1)
    df = pd.DataFrame({"degree_id": np.repeat(np.arange(20), 5), "cohort": np.tile(np.arange(5), 20),
                       "a": rng.normal(size=100)})
    df["b"] = 2 * df["a"]
    df["deg_level"] = df["degree_id"] * 0.1
    df["y"] = rng.normal(size=100)
    spec = Specification(outcome="y", treatments=("a", "b"), controls=(), standardize=(), cluster=None, vcov="HC1")
    with pytest.raises(CollinearityError) as err:
        fit(df, spec)
    assert err.value.column == "b"
    with pytest.raises(CollinearityError) as err:
        fit(df, spec.with_(treatments=("a", "deg_level")))
    assert err.value.column == "deg_level"


def test_spec_validation_and_missing_columns(small_panel):
    with pytest.raises(DomainError):
        Specification(outcome="y", trend="quadratic")
    with pytest.raises(DomainError):
        Specification(outcome="y", cluster=None)
    with pytest.raises(DomainError):
        Specification.from_dict({"outcome": "y", "clusters": "x"})
    with pytest.raises(DataContractError):
        fit(small_panel, baseline_spec(outcome="income"))
    with pytest.raises(DataContractError):
        fit(small_panel, baseline_spec(sample="gender == 'X'"))
    with pytest.raises(DataContractError):
        fit(small_panel, baseline_spec(sample="gender ==="))


def test_few_clusters_warn():
    rng = np.random.default_rng(0)
    df = pd.DataFrame({"g": np.repeat(np.arange(5), 20), "x": rng.normal(size=100), "y": rng.normal(size=100)})
    with pytest.warns(UserWarning, match="clusters"):
        fit(df, Specification(outcome="y", treatments=("x",), controls=(), fixed_effects=(), cluster="g"))


def test_singletons_are_dropped_and_counted():
    df = pd.DataFrame({"degree_id": [1, 1, 1, 2, 2, 2, 3], "cohort": [1, 2, 2, 1, 2, 1, 1],
                       "x": [0.1, 0.5, 0.2, 0.3, 0.9, 1.4, 2.0], "y": [1.0, 2.0, 0.7, 1.5, 2.5, 3.1, 9.0]})
    res = fit(df, Specification(outcome="y", treatments=("x",), controls=(), cluster=None, vcov="HC1",
                                standardize=()))
    assert res.singletons_dropped == 1
    assert res.nobs == 6
    oracle = dummy_ols(df.y.to_numpy()[:6], df[["x"]].to_numpy()[:6], [df.degree_id[:6], df.cohort[:6]])
    assert res["x"] == pytest.approx(oracle[0], abs=1e-8)
    keep = drop_singletons([np.array([0, 0, 1, 1, 2]), np.array([0, 1, 0, 1, 0])])
    assert keep.tolist() == [True, True, True, True, False]


def test_absorb_single_dimension_is_one_step():
    x = np.arange(10.0)
    res = absorb(x, [FixedEffect.from_labels(np.arange(10) % 3)])
    assert res.iterations == 1 and res.converged


def test_degree_trend_matches_generated_regressors(small_panel):
    spec = baseline_spec(standardize=(), trend="degree")
    res = fit(small_panel, spec)
    df = small_panel.students.query(spec.sample)
    df = df.dropna(subset=["log_earnings", "loo_female_mean", "loo_male_mean", "own_flfp"])
    counts = df.groupby("degree_id").cohort.transform("nunique")
    df = df[counts >= 2]  # identical sample: no singletons at this scale
    assert res.nobs == len(df)
    X = df[["loo_female_mean", "loo_male_mean", "own_flfp"]].to_numpy()
    t = (df.cohort - df.cohort.min()).to_numpy(float)
    oracle = dummy_ols(df.log_earnings.to_numpy(), X, [df.degree_id, df.cohort], slope_group=df.degree_id, t=t)
    np.testing.assert_allclose(res.coef, oracle, atol=1e-7)


def test_region_trend_adds_named_regressors(small_panel):
    res = fit(small_panel, baseline_spec(trend="region"))
    trend_terms = [n for n in res.names if n.startswith("trend[")]
    assert len(trend_terms) == small_panel.students.degree_region_id.nunique() - 1


# -- recovery ----------------------------------------------------------------------

def test_gender_gap_recovered(small_panel):
    res = gender_gap(small_panel)
    assert abs(res["female"] - (-0.113)) <= 2 * res.se_of("female")


def test_null_gender_gap():
    panel = generate_panel(NULL, small_calibration(200), seed=8)
    res = gender_gap(panel)
    assert abs(res.tstat[res.index("female")]) < 2.5


def test_job_type_control_removes_mediated_gap():
    kappa = 0.5
    panel = generate_panel(DgpSpec(fulltime_hours_loading=kappa), small_calibration(300), seed=9)
    total = gender_gap(panel, "log_weekly_hours")
    direct = gender_gap(panel, "log_weekly_hours", controls=("bachelor_grade", "fulltime"))
    planted_direct = -0.083 - kappa * (-0.051)
    assert abs(total["female"] - (-0.083)) <= 2 * total.se_of("female")
    assert abs(direct["female"] - planted_direct) <= 2 * direct.se_of("female")
    assert direct["fulltime"] == pytest.approx(kappa, abs=3 * direct.se_of("fulltime"))
    assert abs(direct["female"]) < abs(total["female"])


def test_peer_effect_recovered_on_moderate_panel():
    panel = compute_exposures(generate_panel(DgpSpec(), small_calibration(600), seed=21))
    res = fit(panel, baseline_spec())
    planted = panel.truth["planted"]["log_earnings"]
    assert abs(res["loo_female_mean"] - planted["female_peer"]) <= 2.5 * res.se_of("loo_female_mean")
    assert abs(res["loo_male_mean"]) <= 2.5 * res.se_of("loo_male_mean")


@pytest.mark.slow
def test_coverage_of_confidence_intervals():
    cal = small_calibration(100)
    spec = baseline_spec()

    def one(seed_seq, i):
        panel = compute_exposures(generate_panel(NULL, cal, seed=int(seed_seq.generate_state(1)[0])))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lo, hi = fit(panel, spec).conf_int()[0]
        return lo <= 0.0 <= hi

    covered = replicate(one, 1000, seed=2024)
    rate = np.mean(covered)
    print(f"coverage of 95% intervals for the female-peer effect: {rate:.3f}")
    assert abs(rate - 0.95) <= 0.02


# -- balance -----------------------------------------------------------------------

def test_balance_suite_structure(small_panel):
    rep = balance_suite(small_panel, baseline_spec(sample="gender == 'F'"))
    t = rep.tstats()
    assert list(t.columns) == ["loo_female_mean", "loo_male_mean"]
    assert "pred_log_earnings" in t.index and "bachelor_grade" in t.index
    for fit_ in rep.predicted_fits.values():
        assert abs(fit_["loo_female_mean"]) < 0.01
    for tests in rep.joint_tests.values():
        assert 0 <= tests["p_cluster"] <= 1 and 0 <= tests["p_classical"] <= 1
        assert tests["df_num"] == 5
    d = rep.to_dict()
    assert 0 <= d["rejection_rate_5pct"] <= 1


def test_balance_flags_confounded_covariate():
    hits = []
    for seed in range(30):
        panel = compute_exposures(generate_panel(DgpSpec(confounding_loading=0.1), small_calibration(150), seed=seed))
        rep = balance_suite(panel, baseline_spec(sample="gender == 'F'"), outcomes=())
        hits.append(abs(rep.tstats().loc["bachelor_grade", "loo_female_mean"]) > 1.96)
    assert np.mean(hits) > 0.8


def test_wald_matches_single_t_squared(small_panel):
    res = fit(small_panel, baseline_spec())
    f, p, q, df = wald_test(res, ["loo_female_mean"])
    assert q == 1
    assert f == pytest.approx(res.tstat[0] ** 2)
    assert p == pytest.approx(res.pvalue[0])


# -- randomization inference ---------------------------------------------------------

def test_permutation_determinism_across_threads(small_panel):
    a = randomization_inference(small_panel, 40, seed=5, threads=1)
    b = randomization_inference(small_panel, 40, seed=5, threads=4)
    np.testing.assert_array_equal(a.draws, b.draws)
    c = randomization_inference(small_panel, 40, seed=6)
    assert not np.array_equal(a.draws, c.draws)


def test_permutation_needs_seed(small_panel):
    with pytest.raises(DomainError):
        randomization_inference(small_panel, 10, seed=None)


def test_unstratified_permutation_option(small_panel):
    res = randomization_inference(small_panel, 5, seed=1, strata=None)
    assert res.strata is None and len(res.draws) == 5


def test_random_panel_inside_band():
    panel = generate_panel(DgpSpec(), small_calibration(300), seed=3)
    res = randomization_inference(panel, 200, seed=3)
    assert res.min <= res.observed <= res.max


def test_sorted_drift_exceeds_band():
    panel = generate_panel(DgpSpec(regime="sorted", drift_sd=0.3), small_calibration(300), seed=3)
    res = randomization_inference(panel, 200, seed=3)
    assert res.observed > res.p99


def test_permutation_draws_do_not_reuse_generator_streams(desk_panel):
    # the panel's own seed must not yield permutation keys that track origin FLFP
    res = randomization_inference(desk_panel, 8, seed=7)
    assert res.max < 1.5 * res.mean


# -- simple OLS and survey regressions --------------------------------------------

def test_simple_ols_exact_line():
    df = pd.DataFrame({"x": np.arange(10.0)})
    df["y"] = 2 * df.x
    res = simple_ols(df, "y", "x")
    assert res["x"] == pytest.approx(2.0)
    assert res.r2 == pytest.approx(1.0)


def test_group_effects_attenuate_when_groups_load_on_x():
    rng = np.random.default_rng(0)
    g = rng.integers(0, 8, 4000)
    mu = rng.normal(0, 2, 8)
    x = mu[g] + rng.normal(size=4000)
    y = 1.0 * x + 3.0 * mu[g] + rng.normal(size=4000)
    pooled = simple_ols(pd.DataFrame({"x": x, "y": y, "g": g}), "y", "x")
    within = simple_ols(pd.DataFrame({"x": x, "y": y, "g": g}), "y", "x", groups="g")
    # plug-in: pooled slope = 1 + 3 cov(mu, x)/var(x)
    plug_in = 1 + 3 * np.cov(mu[g], x)[0, 1] / np.var(x, ddof=1)
    assert pooled["x"] == pytest.approx(plug_in, abs=0.05)
    assert within["x"] == pytest.approx(1.0, abs=0.05)
    assert within["x"] < pooled["x"]


def test_pseudo_survey_signs():
    env = SearchEnvironment(beta=0.95, b=0.2, theta=0.7, alpha_true=0.34, gamma_true=0.54)
    survey = pseudo_survey(env, 2000, seed=11)
    res = simple_ols(survey, "accept_pct", ["alpha_pct", "gamma_pct"], groups="field")
    assert res["gamma_pct"] > 0 and res["alpha_pct"] < 0
