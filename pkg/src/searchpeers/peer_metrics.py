"""Leave-one-out peer exposures and composition diagnostics for degree-cohort panels.

All diagnostics here work on degree-cohort cells. Output frames are sorted by
``(degree_id, cohort)`` (or ``degree_id``) so results do not depend on the
order of student rows.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import stats

from .errors import DataContractError, StructuralError
from .fe import FixedEffect, absorb

HIST_BIN_WIDTH = 0.75
SIZE_TREND_P = 0.10
# cell tables are small, so demean far past the regression tolerance
CELL_DEMEAN_TOL = 1e-12
EXPOSURE_COLUMNS = ["loo_female_mean", "loo_male_mean", "own_flfp", "n_F", "n_M", "exposure_missing"]
REQUIRED = ("degree_id", "cohort", "gender", "flfp_origin")


def _students(panel):
    return panel.students if hasattr(panel, "students") else panel


def _require(df, cols):
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise DataContractError(f"panel lacks required columns: {missing}")


def _cell_codes(df):
    codes, uniques = pd.factorize(pd.MultiIndex.from_arrays([df["degree_id"], df["cohort"]]), sort=True)
    return codes, len(uniques)


def compute_exposures(panel):
    """Attach leave-one-out exposure columns to every student.

    Same-gender peers exclude the student; opposite-gender peers are the full
    opposite-gender cell. A student alone in their gender within the cell gets
    a missing same-gender exposure and ``exposure_missing = True``.

    Returns a copy of the student frame (or of the panel, if a panel was given).

    Raises
    ------
    StructuralError
        If any degree-cohort cell has no women or no men.
    """
    df = _students(panel)
    _require(df, REQUIRED)
    gender = df["gender"].to_numpy()
    if not np.isin(gender, ["F", "M"]).all():
        raise DataContractError("gender must be coded 'F' or 'M'")
    female = gender == "F"
    x = df["flfp_origin"].to_numpy(dtype=float)
    cell, n_cells = _cell_codes(df)

    n_f = np.bincount(cell, female, n_cells)
    n_m = np.bincount(cell, ~female, n_cells)
    empty = (n_f == 0) | (n_m == 0)
    if empty.any():
        raise StructuralError(f"{int(empty.sum())} degree-cohort cells lack a woman or a man")
    s_f = np.bincount(cell, np.where(female, x, 0.0), n_cells)
    s_m = np.bincount(cell, np.where(female, 0.0, x), n_cells)

    nf_i, nm_i = n_f[cell], n_m[cell]
    with np.errstate(invalid="ignore", divide="ignore"):
        loo_f = np.where(female, (s_f[cell] - x) / (nf_i - 1), s_f[cell] / nf_i)
        loo_m = np.where(female, s_m[cell] / nm_i, (s_m[cell] - x) / (nm_i - 1))
    missing = np.where(female, nf_i == 1, nm_i == 1)
    loo_f[female & missing] = np.nan
    loo_m[~female & missing] = np.nan

    out = df.copy()
    out["loo_female_mean"] = loo_f
    out["loo_male_mean"] = loo_m
    out["own_flfp"] = x
    out["n_F"] = nf_i.astype(np.int64)
    out["n_M"] = nm_i.astype(np.int64)
    out["exposure_missing"] = missing
    if hasattr(panel, "with_students"):
        return panel.with_students(out)
    return out


def cell_table(panel, value_col=None, *, female_only=False):
    """Aggregate students to degree-cohort cells: size, and the mean of ``value_col``.

    Missing values of ``value_col`` are skipped within the cell.
    """
    df = _students(panel)
    if female_only:
        df = df[df["gender"] == "F"]
    grouped = df.groupby(["degree_id", "cohort"], sort=True)
    table = grouped.size().rename("size").to_frame()
    if value_col is not None:
        table["value"] = grouped[value_col].mean()
    return table.reset_index()


def two_way_residuals(cells, value="value"):
    """Residuals of ``value`` after degree and cohort intercepts, at cell level."""
    fes = [FixedEffect.from_labels(cells["degree_id"], "degree"),
           FixedEffect.from_labels(cells["cohort"], "cohort")]
    return absorb(cells[value].to_numpy(dtype=float), fes, tol=CELL_DEMEAN_TOL).values


def _drop_thin_degrees(cells, min_cohorts, what):
    per_degree = cells.groupby("degree_id")["cohort"].transform("size")
    thin = cells.loc[per_degree < min_cohorts, "degree_id"].unique()
    if thin.size:
        warnings.warn(f"{thin.size} degrees with fewer than {min_cohorts} cohorts excluded from {what}",
                      stacklevel=3)
    return cells[per_degree >= min_cohorts].reset_index(drop=True), sorted(thin.tolist())


@dataclass
class ResidualVariation:
    exposure: str
    raw_sd: float
    residual_sd: float
    n_cells: int
    n_degrees: int
    quintiles: pd.DataFrame
    histogram: dict
    excluded_degrees: list = field(default_factory=list)

    def to_dict(self):
        return {
            "exposure": self.exposure,
            "raw_sd": self.raw_sd,
            "residual_sd": self.residual_sd,
            "n_cells": self.n_cells,
            "n_degrees": self.n_degrees,
            "excluded_degrees": self.excluded_degrees,
            "quintiles": self.quintiles.to_dict(orient="records"),
            "histogram": self.histogram,
        }


def residual_histogram(resid, width=HIST_BIN_WIDTH):
    lo = math.floor(resid.min() / width) * width
    hi = math.ceil(resid.max() / width) * width
    if hi <= lo:
        hi = lo + width
    edges = lo + width * np.arange(round((hi - lo) / width) + 1)
    counts, _ = np.histogram(resid, bins=edges)
    return {"bin_width": width, "edges": edges.tolist(), "counts": counts.tolist()}


def residual_variation(panel, exposure_col="loo_female_mean"):
    """Raw and two-way-residual spread of a cell-level exposure.

    The exposure is averaged within each degree-cohort cell, then degree and
    cohort intercepts are removed across cells (unweighted). Quintiles group
    degrees by their average cell size across cohorts; residual SDs use ``ddof=1``.
    """
    df = _students(panel)
    _require(df, ("degree_id", "cohort", exposure_col))
    cells = cell_table(df, exposure_col)
    cells, excluded = _drop_thin_degrees(cells, 2, "residual variation")
    if cells.empty:
        raise StructuralError("no degree has two or more cohorts")
    cells["resid"] = two_way_residuals(cells)
    n_deg = cells["degree_id"].nunique()
    if n_deg >= 5:
        deg_size = cells.groupby("degree_id")["size"].mean()
        labels = pd.qcut(deg_size.rank(method="first"), 5, labels=[1, 2, 3, 4, 5]).astype(int)
        cells["quintile"] = cells["degree_id"].map(labels)
    else:
        cells["quintile"] = 1
    quint = cells.groupby("quintile").agg(
        min_size=("size", "min"),
        max_size=("size", "max"),
        n_cells=("size", "size"),
        raw_mean=("value", "mean"),
        raw_sd=("value", "std"),
        residual_sd=("resid", "std"),
        residual_min=("resid", "min"),
        residual_max=("resid", "max"),
    ).reset_index()
    return ResidualVariation(
        exposure=exposure_col,
        raw_sd=float(cells["value"].std()),
        residual_sd=float(cells["resid"].std()),
        n_cells=len(cells),
        n_degrees=n_deg,
        quintiles=quint,
        histogram=residual_histogram(cells["resid"].to_numpy()),
        excluded_degrees=excluded,
    )


SHOCK_CHARACTERISTICS = {
    "mean_grade": ("bachelor_grade", "mean"),
    "sd_grade": ("bachelor_grade", "std"),
    "size": (None, "size"),
}


def characteristic_cells(panel, characteristic):
    """Cell-level series for a named characteristic, or any student column (cell mean)."""
    df = _students(panel)
    col, how = SHOCK_CHARACTERISTICS.get(characteristic, (characteristic, "mean"))
    grouped = df.groupby(["degree_id", "cohort"], sort=True)
    if how == "size":
        values = grouped.size()
    else:
        _require(df, (col,))
        values = grouped[col].agg(how)
    return values.rename("value").reset_index()


def shock_statistics(panel, characteristic="mean_grade"):
    """Cross-cohort shock scores per degree.

    ``z_value`` is the mean absolute two-way residual over the degree's observed
    cohorts; ``relative_z`` divides it by the degree's cross-cohort mean of the
    characteristic and is NaN (with ``relative_undefined``) when that mean is 0.
    """
    cells = characteristic_cells(panel, characteristic).dropna(subset=["value"])
    cells, _ = _drop_thin_degrees(cells, 2, "shock statistics")
    cells["resid"] = two_way_residuals(cells)
    g = cells.groupby("degree_id", sort=True)
    out = pd.DataFrame({
        "z_value": g["resid"].apply(lambda r: float(np.abs(r).mean())),
        "degree_mean": g["value"].mean(),
        "T_max": g.size(),
    })
    # residuals below demeaning tolerance count as zero
    out.loc[out["z_value"] < 1e-9, "z_value"] = 0.0
    undefined = out["degree_mean"] == 0
    out["relative_z"] = np.where(undefined, np.nan, out["z_value"] / out["degree_mean"].where(~undefined, 1.0))
    out["relative_undefined"] = undefined
    out["characteristic"] = characteristic
    out = out.reset_index()
    return out[["degree_id", "characteristic", "z_value", "relative_z", "degree_mean", "T_max",
                "relative_undefined"]]


def filter_by_shock(stats_frame, pct, column="relative_z"):
    """Degree ids in the lowest ``pct`` share of ``column``.

    Keeps exactly ``ceil(pct * D)`` degrees (D = degrees with a defined value),
    ordering by the score and then by degree id so ties are deterministic.
    """
    if not 0 < pct <= 1:
        raise ValueError("pct must be in (0, 1]")
    valid = stats_frame.dropna(subset=[column]).sort_values([column, "degree_id"], kind="mergesort")
    keep = math.ceil(pct * len(valid) - 1e-9)
    return valid["degree_id"].iloc[:keep].tolist()


@dataclass
class SizeTrendFlags:
    flagged: frozenset
    skipped: list
    p_values: pd.Series
    threshold: float

    @property
    def flag_rate(self):
        return len(self.flagged) / len(self.p_values) if len(self.p_values) else float("nan")

    def to_dict(self):
        return {
            "threshold": self.threshold,
            "flagged": sorted(int(d) if isinstance(d, (int, np.integer)) else d for d in self.flagged),
            "skipped": self.skipped,
            "n_tested": int(len(self.p_values)),
            "flag_rate": self.flag_rate,
        }


def slope_pvalues(cells):
    """Two-sided p-value of the OLS time slope of ``value`` within each degree."""
    t = cells["cohort"].to_numpy(dtype=float)
    y = cells["value"].to_numpy(dtype=float)
    fe = FixedEffect.from_labels(cells["degree_id"])
    n = fe.counts
    tc = t - (np.bincount(fe.codes, t, fe.n_groups) / n)[fe.codes]
    yc = y - (np.bincount(fe.codes, y, fe.n_groups) / n)[fe.codes]
    stt = np.bincount(fe.codes, tc * tc, fe.n_groups)
    sty = np.bincount(fe.codes, tc * yc, fe.n_groups)
    syy = np.bincount(fe.codes, yc * yc, fe.n_groups)
    slope = sty / stt
    ssr = np.maximum(syy - slope * sty, 0.0)
    df = n - 2
    se = np.sqrt(ssr / df / stt)
    scale = np.maximum(np.abs(y).max(), 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tstat = slope / se
    p = 2.0 * stats.t.sf(np.abs(tstat), df)
    exact = se <= 1e-12 * scale
    # exact fits: any nonzero slope is certain, a flat series carries no trend
    p = np.where(exact, np.where(np.abs(slope) > 1e-12 * scale, 0.0, 1.0), p)
    ids = cells["degree_id"].drop_duplicates().sort_values().to_numpy()
    return pd.Series(p, index=ids, name="p_value")


def flag_size_trends(panel, p_threshold=SIZE_TREND_P):
    """Degrees whose cell size has a significant linear time trend (p <= threshold)."""
    cells = characteristic_cells(panel, "size")
    per_degree = cells.groupby("degree_id")["cohort"].transform("size")
    skipped = sorted(cells.loc[per_degree < 3, "degree_id"].unique().tolist())
    cells = cells[per_degree >= 3]
    if cells.empty:
        return SizeTrendFlags(frozenset(), skipped, pd.Series(dtype=float, name="p_value"), p_threshold)
    p = slope_pvalues(cells)
    return SizeTrendFlags(frozenset(p.index[p <= p_threshold].tolist()), skipped, p, p_threshold)
