"""Synthetic province / degree / cohort / student panels with planted peer effects.

Generation runs in stages (provinces, degrees, cells, students, outcomes,
movers), each with its own generator spawned from the master seed. Each
stage's draws therefore stay fixed when a later stage changes.

Students reach a degree through its catchment, a distribution over provinces.
The catchment mixes a local kernel centred on the home province's FLFP with a
national component, and the national share grows with degree size. This
reproduces the pattern that larger programmes draw more heterogeneous cohorts.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy import special, stats

from .errors import DomainError, GenerationError
from .peer_metrics import compute_exposures

STUDENT_COLUMNS = [
    "student_id", "degree_id", "cohort", "gender", "province_id", "flfp_origin", "degree_region_id",
    "bachelor_grade", "age", "mother_college", "father_college", "mother_working",
    "employed", "log_earnings", "log_weekly_hours", "fulltime", "log_hourly_wage",
]
MOVER_COLUMNS = ["work_province_id", "mover", "origin_quartile", "q4_flfp"]
PROVINCE_COLUMNS = ["province_id", "region_id", "flfp", "weight", "flfp_quartile"]
COVARIATES = ["bachelor_grade", "age", "mother_college", "father_college", "mother_working"]
OUTCOMES = ["log_earnings", "log_weekly_hours", "fulltime", "log_hourly_wage"]
PLANTED_OUTCOMES = ["log_weekly_hours", "fulltime", "log_hourly_wage"]
WEEKS_PER_MONTH = 4.33
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class Calibration:
    """Moments the generated panel should reproduce, plus catchment shape knobs."""

    n_provinces: int = 103
    flfp_mean: float = 49.7
    flfp_sd: float = 11.2
    flfp_min: float = 27.3
    flfp_max: float = 66.7
    n_regions: int = 20
    region_noise_sd: float = 3.0
    province_weight_sd: float = 0.3
    n_degrees: int = 1572
    first_cohort: int = 2012
    n_cohorts: int = 5
    size_median: float = 34.0
    size_mean: float = 47.0
    size_min: int = 4
    size_max: int = 410
    short_degree_share: float = 0.08
    female_share: float = 0.578
    female_share_concentration: float = 8.0
    catchment_bandwidth: float = 0.8
    national_share_max: float = 0.75
    national_share_halfsize: float = 16.0
    national_share_steepness: float = 1.3
    national_bandwidth: Optional[float] = 13.0

    def __post_init__(self):
        if not self.flfp_min < self.flfp_mean < self.flfp_max:
            raise DomainError("need flfp_min < flfp_mean < flfp_max")
        if self.flfp_sd <= 0 or self.flfp_sd ** 2 >= (self.flfp_mean - self.flfp_min) * (self.flfp_max - self.flfp_mean):
            raise DomainError("flfp_sd infeasible for a distribution on [flfp_min, flfp_max]")
        if not self.size_min <= self.size_median <= self.size_max or self.size_mean <= self.size_median:
            raise DomainError("size moments need size_min <= median < mean and median <= size_max")
        if self.size_min < 2:
            raise DomainError("size_min must allow one woman and one man")
        if not 0 < self.female_share < 1:
            raise DomainError("female_share must lie in (0, 1)")
        if not 0 <= self.short_degree_share <= 1 or self.n_cohorts < 1:
            raise DomainError("invalid cohort structure")
        if not 0 <= self.national_share_max <= 1 or self.catchment_bandwidth <= 0:
            raise DomainError("national_share_max must lie in [0, 1] and catchment_bandwidth be positive")
        if self.n_provinces < 4 or self.n_degrees < 1:
            raise DomainError("need at least 4 provinces and 1 degree")

    @property
    def cohorts(self):
        return list(range(self.first_cohort, self.first_cohort + self.n_cohorts))

    @property
    def size_sigma(self):
        """Log-normal sigma implied by the median/mean pair."""
        return math.sqrt(2.0 * math.log(self.size_mean / self.size_median))

    def beta_shape(self):
        """Method-of-moments shape of the scaled Beta for province FLFP."""
        width = self.flfp_max - self.flfp_min
        m = (self.flfp_mean - self.flfp_min) / width
        v = (self.flfp_sd / width) ** 2
        common = m * (1.0 - m) / v - 1.0
        return m * common, (1.0 - m) * common

    def to_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class OutcomeEffects:
    """Planted coefficients for one outcome, per SD of the exposure among women."""

    female_peer: float = 0.0
    male_peer: float = 0.0
    own: float = 0.0
    female_gap: float = 0.0


DEFAULT_EFFECTS = {
    "log_weekly_hours": OutcomeEffects(female_peer=0.033, own=0.010, female_gap=-0.083),
    "fulltime": OutcomeEffects(female_peer=0.019, own=0.010, female_gap=-0.051),
    "log_hourly_wage": OutcomeEffects(female_peer=0.004, own=0.0, female_gap=-0.030),
}
DEFAULT_BASE = {"log_weekly_hours": math.log(33.0), "fulltime": 0.72, "log_hourly_wage": math.log(9.0)}
DEFAULT_NOISE = {"log_weekly_hours": 0.30, "log_hourly_wage": 0.40}
DEFAULT_DEGREE_FE_SD = {"log_weekly_hours": 0.08, "fulltime": 0.05, "log_hourly_wage": 0.12}
DEFAULT_COHORT_FE_SD = {"log_weekly_hours": 0.02, "fulltime": 0.01, "log_hourly_wage": 0.03}
DEFAULT_LOADINGS = {
    # per SD of the standardized grade, per year of age, per indicator
    "log_weekly_hours": {"bachelor_grade": 0.010, "age": 0.002, "mother_college": 0.0,
                         "father_college": 0.0, "mother_working": 0.010},
    "fulltime": {"bachelor_grade": 0.010, "age": 0.002, "mother_college": 0.0,
                 "father_college": 0.0, "mother_working": 0.010},
    "log_hourly_wage": {"bachelor_grade": 0.040, "age": 0.005, "mother_college": 0.010,
                        "father_college": 0.015, "mother_working": 0.0},
}


def _effects_from(obj):
    if isinstance(obj, OutcomeEffects):
        return obj
    return OutcomeEffects(**obj)


@dataclass(frozen=True)
class DgpSpec:
    """Data-generating process for outcomes and student assignment.

    Peer and own-origin effects act on women only and are stated in SD units
    of the corresponding exposure among women. Log earnings is the sum of log
    hours, log hourly wage and a constant, so its effects are the sums of the
    hours and wage effects. ``fulltime_hours_loading`` routes part of the
    full-time effect into hours: the direct hours terms are reduced so that
    the total hours effect stays as stated.
    """

    regime: str = "random"
    effects: dict = field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    base: dict = field(default_factory=lambda: dict(DEFAULT_BASE))
    noise_sd: dict = field(default_factory=lambda: dict(DEFAULT_NOISE))
    degree_fe_sd: dict = field(default_factory=lambda: dict(DEFAULT_DEGREE_FE_SD))
    cohort_fe_sd: dict = field(default_factory=lambda: dict(DEFAULT_COHORT_FE_SD))
    cell_shock_sd: float = 0.01
    covariate_loadings: dict = field(default_factory=lambda: {k: dict(v) for k, v in DEFAULT_LOADINGS.items()})
    fulltime_hours_loading: float = 0.0
    employment_rate: float = 0.5
    confounding_loading: float = 0.0
    sorted_region_concentration: float = 0.3
    sorted_home_bias: float = 2.0
    drift_sd: float = 0.0
    mover_share: float = 0.3
    origin_effect: float = 0.022

    def __post_init__(self):
        if self.regime not in ("random", "sorted"):
            raise DomainError("regime must be 'random' or 'sorted'")
        if not 0 < self.employment_rate <= 1:
            raise DomainError("employment_rate must lie in (0, 1]")
        if not 0 <= self.mover_share <= 1:
            raise DomainError("mover_share must lie in [0, 1]")
        if self.drift_sd < 0 or self.cell_shock_sd < 0:
            raise DomainError("standard deviations must be non-negative")
        if any(v < 0 for d in (self.noise_sd, self.degree_fe_sd, self.cohort_fe_sd) for v in d.values()):
            raise DomainError("standard deviations must be non-negative")
        unknown = set(self.effects) - set(PLANTED_OUTCOMES)
        if unknown:
            raise DomainError(f"effects given for unknown outcomes {sorted(unknown)}")
        # outcomes left out of ``effects`` carry no planted terms
        object.__setattr__(self, "effects", {o: _effects_from(self.effects.get(o, OutcomeEffects()))
                                             for o in PLANTED_OUTCOMES})

    def effect(self, outcome):
        return self.effects.get(outcome, OutcomeEffects())

    def total_effects(self, outcome):
        """Effects on an outcome including the earnings identity."""
        if outcome == "log_earnings":
            h, w = self.effect("log_weekly_hours"), self.effect("log_hourly_wage")
            return OutcomeEffects(*(a + b for a, b in zip(dataclasses.astuple(h), dataclasses.astuple(w))))
        return self.effect(outcome)

    def with_(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        out = dataclasses.asdict(self)
        out["effects"] = {k: dataclasses.asdict(v) for k, v in self.effects.items()}
        return out

    @classmethod
    def from_dict(cls, cfg):
        cfg = dict(cfg)
        if "effects" in cfg:
            merged = dict(DEFAULT_EFFECTS)
            merged.update({k: _effects_from(v) for k, v in cfg["effects"].items()})
            cfg["effects"] = merged
        for key, default in (("base", DEFAULT_BASE), ("noise_sd", DEFAULT_NOISE),
                             ("degree_fe_sd", DEFAULT_DEGREE_FE_SD), ("cohort_fe_sd", DEFAULT_COHORT_FE_SD)):
            if key in cfg:
                cfg[key] = {**default, **cfg[key]}
        return cls(**cfg)


@dataclass
class CohortPanel:
    """Students plus province and degree tables and the planted truth."""

    students: pd.DataFrame
    provinces: pd.DataFrame
    degrees: Optional[pd.DataFrame] = None
    truth: dict = field(default_factory=dict)

    def with_students(self, students):
        return dataclasses.replace(self, students=students)

    @property
    def n_students(self):
        return len(self.students)


def _streams(seed, n=6):
    if seed is None:
        raise DomainError("a seed is required")
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def quartile_labels(values):
    """Quartile 1..4 by rank; ties broken by position so each quartile gets n/4 items."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(len(values))
    return (ranks * 4) // len(values) + 1


def generate_provinces(calibration, rng):
    """Province FLFP as stratified quantiles of a scaled Beta, shuffled; regions group nearby FLFP."""
    cal = calibration
    a, b = cal.beta_shape()
    u = (np.arange(cal.n_provinces) + 0.5) / cal.n_provinces
    flfp = cal.flfp_min + (cal.flfp_max - cal.flfp_min) * stats.beta.ppf(u, a, b)
    flfp = rng.permutation(flfp)
    weight = rng.lognormal(0.0, cal.province_weight_sd, cal.n_provinces)
    weight /= weight.sum()
    order = np.argsort(flfp + rng.normal(0.0, cal.region_noise_sd, cal.n_provinces), kind="mergesort")
    region = np.empty(cal.n_provinces, dtype=np.int64)
    for r, chunk in enumerate(np.array_split(order, min(cal.n_regions, cal.n_provinces))):
        region[chunk] = r + 1
    return pd.DataFrame({
        "province_id": np.arange(1, cal.n_provinces + 1),
        "region_id": region,
        "flfp": flfp,
        "weight": weight,
        "flfp_quartile": quartile_labels(flfp),
    })


def _degree_sizes(cal, rng, n):
    mu, sigma = math.log(cal.size_median), cal.size_sigma
    lo, hi = (math.log(cal.size_min) - mu) / sigma, (math.log(cal.size_max) - mu) / sigma
    z = special.ndtri(special.ndtr(lo) + rng.random(n) * (special.ndtr(hi) - special.ndtr(lo)))
    return np.exp(mu + sigma * z)


def _kernel(w, flfp, centre, bandwidth):
    k = w[None, :] * np.exp(-0.5 * ((flfp[None, :] - centre[:, None]) / bandwidth) ** 2)
    return k / k.sum(axis=1, keepdims=True)


def generate_degrees(calibration, provinces, spec, rng):
    """Degree table: home province, base size, female share, observed cohorts, catchment."""
    cal = calibration
    n = cal.n_degrees
    w = provinces["weight"].to_numpy()
    flfp = provinces["flfp"].to_numpy()
    home = rng.choice(len(w), size=n, p=w)
    size = _degree_sizes(cal, rng, n)
    conc = cal.female_share_concentration
    female_share = rng.beta(cal.female_share * conc, (1 - cal.female_share) * conc, n)
    n_obs = np.full(n, cal.n_cohorts)
    first = np.zeros(n, dtype=np.int64)
    if cal.n_cohorts > 2:
        short = rng.random(n) < cal.short_degree_share
        n_obs[short] = rng.integers(2, cal.n_cohorts, size=int(short.sum()))
        first[short] = rng.integers(0, cal.n_cohorts - n_obs[short] + 1)
    ratio = (size / cal.national_share_halfsize) ** cal.national_share_steepness
    national = cal.national_share_max * ratio / (1.0 + ratio)

    if spec.regime == "random":
        kernel = _kernel(w, flfp, flfp[home], cal.catchment_bandwidth)
        if cal.national_bandwidth is None:
            wide = np.broadcast_to(w, kernel.shape)
        else:
            wide = _kernel(w, flfp, flfp[home], cal.national_bandwidth)
        catch = (1.0 - national)[:, None] * kernel + national[:, None] * wide
    else:
        region = provinces["region_id"].to_numpy() - 1
        n_reg = region.max() + 1
        alpha = np.full(n_reg, spec.sorted_region_concentration)
        rweights = rng.dirichlet(alpha, size=n)
        rweights[np.arange(n), region[home]] += spec.sorted_home_bias
        catch = w[None, :] * rweights[:, region]
        catch /= catch.sum(axis=1, keepdims=True)

    degrees = pd.DataFrame({
        "degree_id": np.arange(1, n + 1),
        "home_province_id": home + 1,
        "degree_region_id": provinces["region_id"].to_numpy()[home],
        "base_size": size,
        "female_share": female_share,
        "first_cohort": cal.first_cohort + first,
        "n_cohorts": n_obs,
        "national_share": national if spec.regime == "random" else np.nan,
        "drift": rng.normal(0.0, spec.drift_sd, n) if spec.regime == "sorted" else 0.0,
    })
    return degrees, catch


def generate_cells(calibration, degrees, rng):
    """Cell sizes and female counts; cells without both genders are redrawn."""
    cal = calibration
    rep = degrees["n_cohorts"].to_numpy()
    deg_idx = np.repeat(np.arange(len(degrees)), rep)
    offset = np.concatenate([np.arange(k) for k in rep]) if len(rep) else np.zeros(0, dtype=np.int64)
    cohort = degrees["first_cohort"].to_numpy()[deg_idx] + offset
    lam = degrees["base_size"].to_numpy()[deg_idx]
    share = degrees["female_share"].to_numpy()[deg_idx]
    size = np.zeros(len(deg_idx), dtype=np.int64)
    n_f = np.zeros(len(deg_idx), dtype=np.int64)
    todo = np.arange(len(deg_idx))
    rejections = 0
    for attempt in range(MAX_REDRAWS + 1):
        if not todo.size:
            break
        if attempt == MAX_REDRAWS:
            raise GenerationError(f"{todo.size} cells still lack a woman or a man after {MAX_REDRAWS} redraws")
        size[todo] = np.clip(rng.poisson(lam[todo]), cal.size_min, cal.size_max)
        n_f[todo] = rng.binomial(size[todo], share[todo])
        bad = (n_f[todo] == 0) | (n_f[todo] == size[todo])
        rejections += int(bad.sum())
        todo = todo[bad]
    return pd.DataFrame({
        "degree_index": deg_idx,
        "degree_id": degrees["degree_id"].to_numpy()[deg_idx],
        "cohort": cohort,
        "size": size,
        "n_female": n_f,
    }), rejections


def _sample_rows(cum, rows, u):
    """Inverse-CDF categorical draws: for each i, first j with cum[rows[i], j] > u[i]."""
    out = np.empty(len(rows), dtype=np.int64)
    chunk = 50_000
    for s in range(0, len(rows), chunk):
        c = cum[rows[s:s + chunk]]
        out[s:s + chunk] = (c <= u[s:s + chunk, None]).sum(axis=1)
    return np.minimum(out, cum.shape[1] - 1)


def assign_students(calibration, provinces, degrees, catch, cells, spec, rng):
    """Draw each student's gender and origin province from the cell's catchment."""
    sizes = cells["size"].to_numpy()
    cell_of = np.repeat(np.arange(len(cells)), sizes)
    within = np.concatenate([np.arange(k) for k in sizes])
    female = within < cells["n_female"].to_numpy()[cell_of]
    deg_index = cells["degree_index"].to_numpy()
    if spec.regime == "sorted" and spec.drift_sd > 0:
        # exponential tilt of the catchment toward higher/lower FLFP, growing over cohorts
        flfp = provinces["flfp"].to_numpy()
        zf = (flfp - calibration.flfp_mean) / calibration.flfp_sd
        mid = calibration.first_cohort + (calibration.n_cohorts - 1) / 2.0
        tilt = degrees["drift"].to_numpy()[deg_index] * (cells["cohort"].to_numpy() - mid)
        cell_catch = catch[deg_index] * np.exp(tilt[:, None] * zf[None, :])
        cell_catch /= cell_catch.sum(axis=1, keepdims=True)
        cum = np.cumsum(cell_catch, axis=1)
        rows = cell_of
    else:
        cum = np.cumsum(catch, axis=1)
        rows = deg_index[cell_of]
    prov = _sample_rows(cum, rows, rng.random(len(cell_of)))
    return pd.DataFrame({
        "degree_id": cells["degree_id"].to_numpy()[cell_of],
        "cohort": cells["cohort"].to_numpy()[cell_of],
        "gender": np.where(female, "F", "M"),
        "province_id": provinces["province_id"].to_numpy()[prov],
        "flfp_origin": provinces["flfp"].to_numpy()[prov],
        "degree_region_id": degrees["degree_region_id"].to_numpy()[deg_index[cell_of]],
    })


def _standardize(x, ref_mask):
    ref = x[ref_mask & ~np.isnan(x)]
    mean, sd = float(ref.mean()), float(ref.std())
    return np.nan_to_num((x - mean) / sd), mean, sd


def _cell_deviation(df):
    """Cell female mean FLFP minus the degree average of cell means, in SD units."""
    female = (df["gender"] == "F").to_numpy()
    cell_mean = df["flfp_origin"].where(female).groupby([df["degree_id"], df["cohort"]]).transform("mean")
    dev = cell_mean - cell_mean.groupby(df["degree_id"]).transform("mean")
    dev = dev.to_numpy()
    return dev / dev.std() if dev.std() > 0 else dev


def draw_covariates(df, spec, rng):
    n = len(df)
    z = rng.standard_normal(n)
    if spec.confounding_loading:
        z = z + spec.confounding_loading * _cell_deviation(df)
    out = df.copy()
    out["bachelor_grade"] = 100.3 + 7.4 * z
    out["age"] = np.clip(np.round(rng.normal(24.4, 2.2, n)), 20, 45).astype(np.int64)
    out["mother_college"] = (rng.random(n) < 0.20).astype(np.int64)
    out["father_college"] = (rng.random(n) < 0.24).astype(np.int64)
    out["mother_working"] = (rng.random(n) < 0.62).astype(np.int64)
    return out, z


def draw_outcomes(df, grade_z, spec, calibration, rng):
    """Outcomes for every student; non-employed rows are blanked afterwards."""
    n = len(df)
    exp = compute_exposures(df)
    female = (df["gender"] == "F").to_numpy()
    z_fp, m_fp, s_fp = _standardize(exp["loo_female_mean"].to_numpy(), female)
    z_mp, m_mp, s_mp = _standardize(exp["loo_male_mean"].to_numpy(), female)
    z_own, m_own, s_own = _standardize(exp["own_flfp"].to_numpy(), female)
    deg_codes, deg_ids = pd.factorize(df["degree_id"], sort=True)
    coh_codes, coh_ids = pd.factorize(df["cohort"], sort=True)
    cell_codes, _ = pd.factorize(pd.MultiIndex.from_arrays([df["degree_id"], df["cohort"]]), sort=True)
    covs = {
        "bachelor_grade": grade_z,
        "age": df["age"].to_numpy(dtype=float) - 24.0,
        "mother_college": df["mother_college"].to_numpy(dtype=float),
        "father_college": df["father_college"].to_numpy(dtype=float),
        "mother_working": df["mother_working"].to_numpy(dtype=float),
    }
    fem = female.astype(float)
    truth = {"degree_fe": {}, "cohort_fe": {}}
    values = {}
    kappa = spec.fulltime_hours_loading
    for outcome in ("fulltime", "log_hourly_wage", "log_weekly_hours"):
        eff = spec.effect(outcome)
        if outcome == "log_weekly_hours" and kappa:
            ft = spec.effect("fulltime")
            eff = OutcomeEffects(eff.female_peer - kappa * ft.female_peer, eff.male_peer - kappa * ft.male_peer,
                                 eff.own - kappa * ft.own, eff.female_gap - kappa * ft.female_gap)
        theta = rng.normal(0.0, spec.degree_fe_sd.get(outcome, 0.0), len(deg_ids))
        alpha = rng.normal(0.0, spec.cohort_fe_sd.get(outcome, 0.0), len(coh_ids))
        truth["degree_fe"][outcome] = theta.tolist()
        truth["cohort_fe"][outcome] = alpha.tolist()
        mean = (spec.base[outcome] + theta[deg_codes] + alpha[coh_codes]
                + fem * (eff.female_gap + eff.female_peer * z_fp + eff.male_peer * z_mp + eff.own * z_own))
        for name, load in spec.covariate_loadings.get(outcome, {}).items():
            mean = mean + load * covs[name]
        if outcome == "fulltime":
            prob = np.clip(mean, 0.0, 1.0)
            values[outcome] = (rng.random(n) < prob).astype(float)
            truth["fulltime_clipped_share"] = float(np.mean((mean < 0) | (mean > 1)))
            continue
        shock = rng.normal(0.0, spec.cell_shock_sd, cell_codes.max() + 1)[cell_codes]
        noise = rng.normal(0.0, spec.noise_sd.get(outcome, 0.0), n)
        if outcome == "log_weekly_hours":
            mean = mean + kappa * (values["fulltime"] - spec.base["fulltime"])
        values[outcome] = mean + shock + noise
    values["log_earnings"] = values["log_weekly_hours"] + values["log_hourly_wage"] + math.log(WEEKS_PER_MONTH)
    truth["standardization"] = {
        "loo_female_mean": {"mean": m_fp, "sd": s_fp},
        "loo_male_mean": {"mean": m_mp, "sd": s_mp},
        "own_flfp": {"mean": m_own, "sd": s_own},
        "reference": "women with a defined exposure, all employment states",
    }
    return values, truth


def generate_panel(spec=None, calibration=None, seed=None):
    """Build a synthetic panel.

    Parameters
    ----------
    spec : DgpSpec, optional
    calibration : Calibration, optional
    seed : int
        Required; equal seeds give identical panels.

    Returns
    -------
    CohortPanel
        ``students`` has the columns of ``STUDENT_COLUMNS`` in that order,
        sorted by degree, cohort and gender (women first).
    """
    spec = spec or DgpSpec()
    cal = calibration or Calibration()
    r_prov, r_deg, r_cell, r_stud, r_cov, r_out = _streams(seed)
    provinces = generate_provinces(cal, r_prov)
    degrees, catch = generate_degrees(cal, provinces, spec, r_deg)
    cells, rejections = generate_cells(cal, degrees, r_cell)
    students = assign_students(cal, provinces, degrees, catch, cells, spec, r_stud)
    students.insert(0, "student_id", np.arange(1, len(students) + 1))
    students, grade_z = draw_covariates(students, spec, r_cov)
    values, fe_truth = draw_outcomes(students, grade_z, spec, cal, r_out)
    employed = r_out.random(len(students)) < spec.employment_rate
    students["employed"] = employed.astype(np.int64)
    for outcome in OUTCOMES:
        students[outcome] = np.where(employed, values[outcome], np.nan)
    students = students[STUDENT_COLUMNS]

    truth = {
        "seed": seed,
        "calibration": cal.to_dict(),
        "dgp": spec.to_dict(),
        "planted": {o: dataclasses.asdict(spec.total_effects(o)) for o in OUTCOMES},
        "raw_coefficients": {},
        "cell_rejections": rejections,
        "n_students": len(students),
        "n_cells": len(cells),
        "fulltime_hours_loading": spec.fulltime_hours_loading,
        **fe_truth,
    }
    std = fe_truth["standardization"]
    for o in OUTCOMES:
        e = spec.total_effects(o)
        truth["raw_coefficients"][o] = {
            "loo_female_mean": e.female_peer / std["loo_female_mean"]["sd"],
            "loo_male_mean": e.male_peer / std["loo_male_mean"]["sd"],
            "own_flfp": e.own / std["own_flfp"]["sd"],
        }
    return CohortPanel(students=students, provinces=provinces, degrees=degrees, truth=truth)


def generate_mover_sample(spec=None, calibration=None, seed=None):
    """Panel with work provinces and a Q4-versus-Q1 origin indicator.

    A share ``mover_share`` of students works outside their origin province
    (drawn by province weight). Full-time status is redrawn with a work-province
    effect and an origin effect that rises linearly across origin FLFP quartiles,
    so the Q4 minus Q1 gap equals ``spec.origin_effect``. Peer terms are
    left out of this outcome.
    """
    spec = spec or DgpSpec()
    cal = calibration or Calibration()
    panel = generate_panel(spec, cal, seed)
    rng = _streams(seed, 7)[6]
    df = panel.students.copy()
    prov = panel.provinces
    n = len(df)
    quart = prov.set_index("province_id")["flfp_quartile"]
    q = df["province_id"].map(quart).to_numpy()
    mover = rng.random(n) < spec.mover_share
    work = df["province_id"].to_numpy().copy()
    work[mover] = rng.choice(prov["province_id"].to_numpy(), size=int(mover.sum()), p=prov["weight"].to_numpy())
    mover = work != df["province_id"].to_numpy()
    work_fe = rng.normal(0.0, 0.03, len(prov) + 1)
    deg_codes, deg_ids = pd.factorize(df["degree_id"], sort=True)
    theta = np.asarray(panel.truth["degree_fe"]["fulltime"])
    coh_codes, _ = pd.factorize(df["cohort"], sort=True)
    alpha = np.asarray(panel.truth["cohort_fe"]["fulltime"])
    female = (df["gender"] == "F").to_numpy().astype(float)
    p = (spec.base["fulltime"] + theta[deg_codes] + alpha[coh_codes] + work_fe[work]
         + female * spec.effect("fulltime").female_gap + spec.origin_effect * (q - 1) / 3.0)
    ft = (rng.random(n) < np.clip(p, 0.0, 1.0)).astype(float)
    df["fulltime"] = np.where(df["employed"].to_numpy() == 1, ft, np.nan)
    df["work_province_id"] = work
    df["mover"] = mover.astype(np.int64)
    df["origin_quartile"] = q
    df["q4_flfp"] = np.where(q == 4, 1.0, np.where(q == 1, 0.0, np.nan))
    truth = dict(panel.truth)
    truth["origin_effect"] = spec.origin_effect
    truth["mover_share"] = float(mover.mean())
    return dataclasses.replace(panel, students=df[STUDENT_COLUMNS + MOVER_COLUMNS], truth=truth)
