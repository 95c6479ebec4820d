"""Least squares with absorbed fixed effects and cluster-robust covariance."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from scipy import stats

from ..errors import CollinearityError, DataContractError, DomainError
from ..fe import ABSORB_MAX_ITER, ABSORB_TOL, FixedEffect, absorb, drop_singletons

VCOV_TYPES = ("CR1", "CR0", "HC1", "classical")
TRENDS = ("none", "degree", "region")
RANK_RTOL = 1e-6  # well above the demeaning tolerance
MIN_CLUSTERS = 30


def _students(panel):
    return panel.students if hasattr(panel, "students") else panel


@dataclass(frozen=True)
class Specification:
    """A linear model: outcome on treatments and controls, net of fixed effects.

    ``sample`` is a pandas query string applied before dropping missing rows.
    Columns in ``standardize`` (default: the treatments) are rescaled to unit
    SD on the estimation sample. ``trend`` adds degree-specific linear time
    slopes (absorbed) or region-by-time regressors.
    """

    outcome: str
    treatments: tuple = ("loo_female_mean", "loo_male_mean")
    controls: tuple = ("own_flfp",)
    fixed_effects: tuple = ("degree_id", "cohort")
    trend: str = "none"
    cluster: Optional[str] = "degree_id"
    sample: Optional[str] = None
    standardize: Optional[tuple] = None
    vcov: str = "CR1"
    time_col: str = "cohort"
    trend_group: str = "degree_id"
    region_col: str = "degree_region_id"
    name: str = ""

    def __post_init__(self):
        for attr in ("treatments", "controls", "fixed_effects"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        if self.standardize is not None:
            object.__setattr__(self, "standardize", tuple(self.standardize))
        if self.trend not in TRENDS:
            raise DomainError(f"trend must be one of {TRENDS}")
        if self.vcov not in VCOV_TYPES:
            raise DomainError(f"vcov must be one of {VCOV_TYPES}")
        if self.vcov.startswith("CR") and not self.cluster:
            raise DomainError("cluster-robust covariance needs a cluster column")
        if not self.treatments:
            raise DomainError("a specification needs at least one treatment")

    @property
    def standardized(self):
        return self.treatments if self.standardize is None else self.standardize

    @property
    def regressors(self):
        return list(self.treatments) + [c for c in self.controls if c not in self.treatments]

    def with_(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, cfg):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(cfg) - known
        if unknown:
            raise DomainError(f"unknown specification keys: {sorted(unknown)}")
        return cls(**cfg)


@dataclass(frozen=True)
class FitResult:
    """Estimates from one specification; immutable."""

    names: tuple
    coef: np.ndarray
    cov: np.ndarray
    nobs: int
    df_resid: int
    df_inference: int
    r2: float
    r2_within: float
    n_clusters: Optional[int] = None
    iterations: int = 0
    converged: bool = True
    singletons_dropped: int = 0
    vcov_type: str = "CR1"
    outcome: str = ""
    k_absorbed: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def se(self):
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def tstat(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    @property
    def pvalue(self):
        return 2.0 * stats.t.sf(np.abs(self.tstat), self.df_inference)

    def conf_int(self, level=0.95):
        q = stats.t.ppf(0.5 + level / 2.0, self.df_inference)
        return np.column_stack([self.coef - q * self.se, self.coef + q * self.se])

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"{name!r} not among {self.names}") from None

    def __getitem__(self, name):
        return float(self.coef[self.index(name)])

    def se_of(self, name):
        return float(self.se[self.index(name)])

    def table(self):
        ci = self.conf_int()
        return pd.DataFrame({
            "coef": self.coef, "se": self.se, "t": self.tstat, "p": self.pvalue,
            "ci_low": ci[:, 0], "ci_high": ci[:, 1],
        }, index=pd.Index(self.names, name="term"))

    def to_dict(self):
        return {
            "outcome": self.outcome,
            "terms": {
                n: {"coef": float(c), "se": float(s), "t": float(t), "p": float(p)}
                for n, c, s, t, p in zip(self.names, self.coef, self.se, self.tstat, self.pvalue)
            },
            "cov": self.cov.tolist(),
            "nobs": self.nobs,
            "n_clusters": self.n_clusters,
            "df_resid": self.df_resid,
            "r2": self.r2,
            "r2_within": self.r2_within,
            "vcov": self.vcov_type,
            "iterations": self.iterations,
            "converged": self.converged,
            "singletons_dropped": self.singletons_dropped,
            **({"extras": self.extras} if self.extras else {}),
        }


def _rank_check(X, names, scale):
    """Raise CollinearityError naming the first column that adds no new direction."""
    if X.shape[1] == 0:
        return
    if X.shape[0] < X.shape[1]:
        raise CollinearityError(names[X.shape[0]], "fewer observations than regressors")
    r = np.linalg.qr(X, mode="r")
    diag = np.abs(np.diag(r))
    for j, name in enumerate(names):
        if diag[j] <= RANK_RTOL * max(scale[j], 1e-300) or scale[j] == 0:
            raise CollinearityError(name)


def _fe_dof(fes, cluster_codes):
    """Absorbed parameters that still count against N in the small-sample factor."""
    if not fes:
        return 0
    if cluster_codes is None:
        return sum(fe.df for fe in fes) - (len(fes) - 1)
    nested = [fe.nested_in(cluster_codes) for fe in fes]
    if any(nested):
        return sum(fe.df - 1 for fe, nest in zip(fes, nested) if not nest)
    return sum(fe.df - 1 for fe in fes) + 1


def estimate(y, X, names, fes=(), *, cluster=None, vcov="CR1", outcome="", tol=ABSORB_TOL,
             max_iter=ABSORB_MAX_ITER, add_intercept=None, extras=None, singletons=0):
    """Core estimator on arrays.

    Parameters
    ----------
    y : (n,) array
    X : (n, k) array
    names : list of str
    fes : sequence of FixedEffect
    cluster : (n,) array of labels, optional
    vcov : {"CR1", "CR0", "HC1", "classical"}
    add_intercept : bool, optional
        Defaults to True when there are no fixed effects.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    names = list(names)
    fes = list(fes)
    if add_intercept is None:
        add_intercept = not fes
    if add_intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ["const"] + names
    n, k = X.shape
    if n == 0:
        raise DataContractError("estimation sample is empty")

    absorbed = absorb(np.column_stack([y, X]), fes, tol=tol, max_iter=max_iter)
    yt, Xt = absorbed.values[:, 0], absorbed.values[:, 1:]
    scale = np.sqrt(((X - X.mean(axis=0)) ** 2).sum(axis=0))
    if add_intercept:
        scale[0] = np.sqrt(n)
    _rank_check(Xt, names, scale)

    xtx = Xt.T @ Xt
    bread = np.linalg.inv(xtx)
    coef = bread @ (Xt.T @ yt)
    resid = yt - Xt @ coef

    cluster_codes = None
    n_clusters = None
    if vcov in ("CR1", "CR0"):
        if cluster is None:
            raise DomainError("cluster-robust covariance needs cluster labels")
        cluster_codes, uniq = pd.factorize(np.asarray(cluster), sort=True)
        n_clusters = len(uniq)
        if n_clusters < 2:
            raise DataContractError("need at least two clusters")
        if n_clusters < MIN_CLUSTERS:
            warnings.warn(f"only {n_clusters} clusters; cluster-robust SEs may be unreliable", stacklevel=3)
    k_fe = _fe_dof(fes, cluster_codes if vcov in ("CR1", "CR0") else None)
    df_resid = n - k - k_fe
    if df_resid <= 0:
        raise DataContractError("no residual degrees of freedom")

    if vcov in ("CR1", "CR0"):
        scores = np.column_stack([np.bincount(cluster_codes, Xt[:, j] * resid, n_clusters) for j in range(k)])
        meat = scores.T @ scores
        c = 1.0
        if vcov == "CR1":
            c = n_clusters / (n_clusters - 1.0) * (n - 1.0) / (n - k - k_fe)
        cov = c * bread @ meat @ bread
        df_inf = n_clusters - 1
    elif vcov == "HC1":
        meat = (Xt * resid[:, None] ** 2).T @ Xt
        cov = n / (n - k - k_fe) * bread @ meat @ bread
        df_inf = df_resid
    else:
        cov = (resid @ resid) / df_resid * bread
        df_inf = df_resid
    cov = 0.5 * (cov + cov.T)

    ssr = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    tss_within = float(yt @ yt)
    return FitResult(
        names=tuple(names),
        coef=coef,
        cov=cov,
        nobs=n,
        df_resid=int(df_resid),
        df_inference=int(df_inf),
        r2=1.0 - ssr / tss if tss > 0 else float("nan"),
        r2_within=1.0 - ssr / tss_within if tss_within > 0 else float("nan"),
        n_clusters=n_clusters,
        iterations=absorbed.iterations,
        converged=absorbed.converged,
        singletons_dropped=singletons,
        vcov_type=vcov,
        outcome=outcome,
        k_absorbed=int(k_fe),
        extras=extras or {},
    )


def _apply_sample(df, sample):
    if not sample:
        return df
    try:
        return df.query(sample)
    except Exception as exc:  # pandas raises several types for bad expressions
        raise DataContractError(f"cannot apply sample filter {sample!r}: {exc}") from exc


def design(panel, spec):
    """Estimation sample and arrays for ``spec`` (after filtering, dropping NaN and singletons)."""
    df = _students(panel)
    regs = spec.regressors
    needed = [spec.outcome, *regs, *spec.fixed_effects]
    if spec.cluster:
        needed.append(spec.cluster)
    if spec.trend != "none":
        needed += [spec.time_col, spec.trend_group if spec.trend == "degree" else spec.region_col]
    needed = list(dict.fromkeys(needed))
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise DataContractError(f"columns not in panel: {missing}")
    df = _apply_sample(df, spec.sample)[needed].dropna()
    if df.empty:
        raise DataContractError("estimation sample is empty after filtering")

    fe_cols = list(spec.fixed_effects)
    if spec.trend == "degree" and spec.trend_group not in fe_cols:
        fe_cols.append(spec.trend_group)
    singletons = 0
    if fe_cols:
        codes = [pd.factorize(df[c], sort=True)[0] for c in fe_cols]
        keep = drop_singletons(codes)
        singletons = int((~keep).sum())
        df = df[keep]
        if df.empty:
            raise DataContractError("estimation sample is empty after dropping singletons")

    X = df[regs].to_numpy(dtype=float)
    names = list(regs)
    sd_info = {}
    for j, col in enumerate(regs):
        if col in spec.standardized:
            mean, sd = X[:, j].mean(), X[:, j].std()
            if sd == 0:
                raise CollinearityError(col, f"regressor {col!r} has no variation in the estimation sample")
            X[:, j] = (X[:, j] - mean) / sd
            sd_info[col] = {"mean": float(mean), "sd": float(sd)}

    t = None
    if spec.trend != "none":
        t = df[spec.time_col].to_numpy(dtype=float)
        t = t - t.min()
    fes = []
    for col in fe_cols:
        slope = t if (spec.trend == "degree" and col == spec.trend_group) else None
        fes.append(FixedEffect.from_labels(df[col].to_numpy(), name=col, slope=slope))
    if spec.trend == "region":
        regions = np.sort(df[spec.region_col].unique())
        reg = df[spec.region_col].to_numpy()
        # first region omitted: the common trend is absorbed by cohort effects
        extra = [np.where(reg == r, t, 0.0) for r in regions[1:]]
        if extra:
            X = np.column_stack([X, *extra])
            names += [f"trend[{spec.region_col}={r}]" for r in regions[1:]]
    cluster = df[spec.cluster].to_numpy() if spec.cluster else None
    return df, df[spec.outcome].to_numpy(dtype=float), X, names, fes, cluster, singletons, sd_info


def fit(panel, spec, *, tol=ABSORB_TOL, max_iter=ABSORB_MAX_ITER):
    """Estimate ``spec`` on a panel (CohortPanel or student DataFrame).

    Fixed effects are absorbed by alternating projections, which gives the same
    coefficients as least squares with explicit dummies. Covariance is CR1 by
    default, clustered on ``spec.cluster``.

    Raises
    ------
    DataContractError
        Missing columns or an empty estimation sample.
    CollinearityError
        A regressor is collinear with earlier ones or with the fixed effects.
    ConvergenceError
        Demeaning did not reach ``tol`` within ``max_iter`` sweeps.
    """
    _, y, X, names, fes, cluster, singletons, sd_info = design(panel, spec)
    return estimate(y, X, names, fes, cluster=cluster if spec.vcov.startswith("CR") else None,
                    vcov=spec.vcov, outcome=spec.outcome, tol=tol, max_iter=max_iter,
                    singletons=singletons, extras={"standardization": sd_info, "spec": spec.name})


def simple_ols(rows, y, x, groups=None):
    """OLS with HC1 standard errors, optionally net of one set of group intercepts.

    Parameters
    ----------
    rows : DataFrame
    y : str
    x : str or list of str
    groups : str, optional
        Column whose categories enter as fixed effects (the intercept is then absorbed).
    """
    xs = [x] if isinstance(x, str) else list(x)
    cols = [y, *xs] + ([groups] if groups else [])
    missing = [c for c in cols if c not in rows.columns]
    if missing:
        raise DataContractError(f"columns not in data: {missing}")
    data = rows[cols].dropna()
    fes = [FixedEffect.from_labels(data[groups].to_numpy(), name=groups)] if groups else []
    return estimate(data[y].to_numpy(dtype=float), data[xs].to_numpy(dtype=float), xs, fes,
                    vcov="HC1", outcome=y)


def wald_test(result, names):
    """Joint test that the named coefficients are zero: ``(F, p, q, df_denominator)``."""
    idx = [result.index(n) for n in names]
    b = result.coef[idx]
    v = result.cov[np.ix_(idx, idx)]
    q = len(idx)
    stat = float(b @ np.linalg.solve(v, b)) / q
    return stat, float(stats.f.sf(stat, q, result.df_inference)), q, result.df_inference
