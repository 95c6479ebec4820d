"""Specification batteries: gender gaps, balance checks, randomization inference, replications."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import DataContractError, DomainError
from ..fe import FixedEffect, absorb
from ..peer_metrics import compute_exposures
from ..seeding import domain_streams
from .core import Specification, _apply_sample, _students, estimate, fit, wald_test

PREDETERMINED = ("bachelor_grade", "age", "mother_college", "father_college", "mother_working")
LABOR_OUTCOMES = ("log_earnings", "log_weekly_hours", "fulltime", "log_hourly_wage")


def gender_gap(panel, outcome="log_earnings", *, controls=("bachelor_grade",), sample="employed == 1",
               fixed_effects=("degree_id", "cohort"), cluster="degree_id", vcov="CR1"):
    """Female coefficient from ``outcome ~ female + controls`` with degree and cohort effects."""
    df = _students(panel)
    if "gender" not in df.columns:
        raise DataContractError("panel lacks a gender column")
    df = df.assign(female=(df["gender"] == "F").astype(float))
    spec = Specification(outcome=outcome, treatments=("female",), controls=tuple(controls),
                         fixed_effects=tuple(fixed_effects), cluster=cluster, sample=sample,
                         standardize=(), vcov=vcov, name="gender_gap")
    return fit(df, spec)


@dataclass
class BalanceReport:
    covariate_fits: dict
    predicted_fits: dict
    joint_tests: dict
    treatments: tuple

    def tstats(self):
        """Covariates (rows, then predicted outcomes) by treatment t-statistics."""
        rows = {}
        for name, res in {**self.covariate_fits, **{f"pred_{k}": v for k, v in self.predicted_fits.items()}}.items():
            rows[name] = {t: float(res.tstat[res.index(t)]) for t in self.treatments}
        return pd.DataFrame.from_dict(rows, orient="index")

    def covariate_rejections(self, level=0.05):
        """Boolean frame of per-covariate, per-treatment rejections at ``level``."""
        out = {}
        for name, res in self.covariate_fits.items():
            out[name] = {t: bool(res.pvalue[res.index(t)] < level) for t in self.treatments}
        return pd.DataFrame.from_dict(out, orient="index")

    def rejection_rate(self, level=0.05):
        return float(self.covariate_rejections(level).to_numpy().mean())

    def to_dict(self):
        def terms(res):
            return {t: {"coef": res[t], "se": res.se_of(t), "t": float(res.tstat[res.index(t)]),
                        "p": float(res.pvalue[res.index(t)])} for t in self.treatments}
        return {
            "covariates": {k: terms(v) for k, v in self.covariate_fits.items()},
            "predicted_outcomes": {k: terms(v) for k, v in self.predicted_fits.items()},
            "joint_tests": self.joint_tests,
            "rejection_rate_5pct": self.rejection_rate(),
        }


def balance_suite(panel, spec, predetermined_covariates=PREDETERMINED, outcomes=LABOR_OUTCOMES):
    """Balance of pre-determined covariates against the treatments.

    (i) Each covariate is regressed on the spec's treatments, controls and fixed
    effects. (ii) Each outcome is predicted from all covariates by OLS on rows
    where it is observed; the prediction for every sample row is then regressed
    like a covariate. (iii) Each treatment is regressed on all covariates within
    the fixed effects and the covariates are tested jointly, with a
    cluster-robust and a classical F.
    """
    df = _students(panel)
    covs = [c for c in predetermined_covariates if c not in spec.regressors]
    missing = [c for c in covs if c not in df.columns]
    if missing:
        raise DataContractError(f"covariates not in panel: {missing}")
    sample = _apply_sample(df, spec.sample)

    cov_fits = {c: fit(sample, spec.with_(outcome=c, sample=None)) for c in covs}

    pred_fits = {}
    for outcome in outcomes:
        if outcome not in sample.columns:
            continue
        train = sample[[outcome, *covs]].dropna()
        if len(train) <= len(covs) + 1:
            continue
        Xtr = np.column_stack([np.ones(len(train)), train[covs].to_numpy(dtype=float)])
        beta = np.linalg.lstsq(Xtr, train[outcome].to_numpy(dtype=float), rcond=None)[0]
        full = sample[covs].to_numpy(dtype=float)
        pred_col = f"pred_{outcome}"
        with_pred = sample.assign(**{pred_col: beta[0] + full @ beta[1:]})
        pred_fits[outcome] = fit(with_pred, spec.with_(outcome=pred_col, sample=None))

    joint = {}
    for treat in spec.treatments:
        jspec = Specification(outcome=treat, treatments=tuple(covs), controls=(),
                              fixed_effects=spec.fixed_effects, cluster=spec.cluster, standardize=(),
                              vcov=spec.vcov, trend=spec.trend)
        robust = fit(sample, jspec)
        classical = fit(sample, jspec.with_(vcov="classical"))
        f_r, p_r, q, d_r = wald_test(robust, covs)
        f_c, p_c, _, d_c = wald_test(classical, covs)
        joint[treat] = {"F_cluster": f_r, "p_cluster": p_r, "df_num": q, "df_den_cluster": d_r,
                        "F_classical": f_c, "p_classical": p_c, "df_den_classical": d_c}
    return BalanceReport(cov_fits, pred_fits, joint, tuple(spec.treatments))


@dataclass
class RandomizationResult:
    observed: float
    draws: np.ndarray
    strata: str = None
    seed: int = None
    extras: dict = field(default_factory=dict)

    @property
    def mean(self):
        return float(self.draws.mean())

    @property
    def min(self):
        return float(self.draws.min())

    @property
    def max(self):
        return float(self.draws.max())

    @property
    def p99(self):
        return float(np.quantile(self.draws, 0.99))

    @property
    def percentile(self):
        """Share of draws (in %) at or below the observed statistic."""
        return float(100.0 * np.mean(self.draws <= self.observed))

    def to_dict(self):
        return {
            "observed": self.observed, "mean": self.mean, "min": self.min, "max": self.max,
            "p99": self.p99, "percentile": self.percentile, "n_draws": int(len(self.draws)),
            "strata": self.strata, "seed": self.seed, "draws": self.draws.tolist(),
        }


class _CellResidualSD:
    """Residual SD of the cell female-mean FLFP for arbitrary reassignments of origins."""

    def __init__(self, df):
        counts = df.groupby("degree_id")["cohort"].transform("nunique")
        df = df[counts >= 2]
        if df.empty:
            raise DataContractError("randomization inference needs degrees observed in two or more cohorts")
        self.df = df
        cell, cells = pd.factorize(pd.MultiIndex.from_arrays([df["degree_id"], df["cohort"]]), sort=True)
        self.cell = cell
        self.n_cells = len(cells)
        self.female = (df["gender"] == "F").to_numpy()
        self.n_f = np.bincount(cell, self.female, self.n_cells)
        if (self.n_f == 0).any():
            raise DataContractError("a degree-cohort cell has no women")
        deg = cells.get_level_values(0)
        coh = cells.get_level_values(1)
        self.fes = [FixedEffect.from_labels(deg, "degree"), FixedEffect.from_labels(coh, "cohort")]

    def __call__(self, x):
        means = np.bincount(self.cell, np.where(self.female, x, 0.0), self.n_cells) / self.n_f
        return float(np.std(absorb(means, self.fes).values, ddof=1))


def randomization_inference(panel, n_draws=500, seed=None, *, strata="degree_id", threads=1):
    """Permutation distribution of the residual SD of the female-peer exposure.

    Each draw reassigns origin FLFP values across students, keeping every
    cell's size and gender mix. With ``strata="degree_id"`` values are shuffled
    among a degree's students across its cohorts; ``strata=None`` shuffles over
    the whole panel. Draw ``i`` uses the ``i``-th seed spawned from ``seed``,
    so results do not depend on ``threads``. The draws live in their own seed
    domain, so reusing the panel's seed is safe.
    """
    if seed is None:
        raise DomainError("randomization_inference requires an explicit seed")
    if n_draws < 1:
        raise DomainError("n_draws must be positive")
    df = _students(panel)
    stat = _CellResidualSD(df)
    x = stat.df["flfp_origin"].to_numpy(dtype=float)
    if strata is None:
        codes = np.zeros(len(x), dtype=np.int64)
    else:
        codes = pd.factorize(stat.df[strata], sort=True)[0]
    base = np.argsort(codes, kind="stable")
    streams = domain_streams(seed, "permute", n_draws)

    def draw(i):
        rng = np.random.default_rng(streams[i])
        order = np.lexsort((rng.random(len(x)), codes))
        shuffled = np.empty_like(x)
        shuffled[base] = x[order]
        return stat(shuffled)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            draws = np.array(list(pool.map(draw, range(n_draws))))
    else:
        draws = np.array([draw(i) for i in range(n_draws)])
    return RandomizationResult(observed=stat(x), draws=draws, strata=strata, seed=seed)


def replicate(func, n, seed, *, threads=1):
    """Run ``func(rng_seed_sequence, i)`` for ``n`` spawned seeds; results in draw order."""
    streams = domain_streams(seed, "replicate", n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda i: func(streams[i], i), range(n)))
    return [func(streams[i], i) for i in range(n)]


def baseline_spec(outcome="log_earnings", **changes):
    """Female-sample linear-in-means specification with own-origin control."""
    spec = Specification(outcome=outcome, sample="gender == 'F' and employed == 1",
                         standardize=("loo_female_mean", "loo_male_mean", "own_flfp"), name="baseline")
    return spec.with_(**changes) if changes else spec


def with_exposures(panel):
    """Attach exposures unless they are already present."""
    df = _students(panel)
    if "loo_female_mean" in df.columns:
        return panel
    return compute_exposures(panel)
