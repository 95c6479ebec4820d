"""Artifact files: schemas, validated writers and readers.

JSON artifacts are checked with JSON Schema; CSV artifacts against an ordered
column contract. Writers validate before touching the disk, and a batch of
outputs is written only after every target has been checked for overwrites.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd

from .errors import DataContractError, SchemaError
from .peer_metrics import EXPOSURE_COLUMNS
from .synth import MOVER_COLUMNS, PROVINCE_COLUMNS, STUDENT_COLUMNS

NUM = {"type": "number"}
NUM_OR_NULL = {"type": ["number", "null"]}
INT = {"type": "integer"}
BOOL = {"type": "boolean"}
STR = {"type": "string"}


def _obj(required, extra=None, additional=True):
    props = dict(required)
    props.update(extra or {})
    return {"type": "object", "required": list(required), "properties": props, "additionalProperties": additional}


_TERM = _obj({"coef": NUM_OR_NULL, "se": NUM_OR_NULL, "t": NUM_OR_NULL, "p": NUM_OR_NULL})
_FIT = _obj({
    "outcome": STR,
    "terms": {"type": "object", "additionalProperties": _TERM},
    "nobs": INT,
    "r2": NUM_OR_NULL,
    "vcov": STR,
    "converged": BOOL,
}, {"n_clusters": {"type": ["integer", "null"]}})

JSON_SCHEMAS = {
    "truth.json": _obj({
        "seed": INT,
        "calibration": {"type": "object"},
        "dgp": {"type": "object"},
        "planted": {"type": "object"},
        "raw_coefficients": {"type": "object"},
        "cell_rejections": INT,
        "n_students": INT,
    }),
    "residual_variation.json": _obj({
        "exposures": {"type": "object", "minProperties": 1, "additionalProperties": _obj({
            "raw_sd": NUM, "residual_sd": NUM, "n_cells": INT,
            "quintiles": {"type": "array", "items": _obj({"quintile": INT, "residual_sd": NUM_OR_NULL})},
            "histogram": _obj({"bin_width": NUM, "edges": {"type": "array"}, "counts": {"type": "array"}}),
        })},
    }),
    "flags.json": _obj({
        "threshold": NUM, "flagged": {"type": "array"}, "skipped": {"type": "array"},
        "n_tested": INT, "flag_rate": NUM_OR_NULL,
    }),
    "fit.json": _obj({
        "specifications": {"type": "array", "minItems": 1, "items": _obj({"spec": {"type": "object"}, "result": _FIT})},
    }),
    "balance.json": _obj({
        "covariates": {"type": "object"},
        "predicted_outcomes": {"type": "object"},
        "joint_tests": {"type": "object"},
        "rejection_rate_5pct": NUM,
    }),
    "permutation.json": _obj({
        "observed": NUM, "mean": NUM, "min": NUM, "max": NUM, "p99": NUM, "percentile": NUM,
        "n_draws": INT, "seed": INT, "draws": {"type": "array", "items": NUM},
    }),
    "solve.json": _obj({
        "R_L": NUM, "R_H": NUM, "lambda_L": NUM, "lambda_H": NUM,
        "accept_pt_L": NUM, "accept_pt_H": NUM,
        "orderings": {"type": "object", "additionalProperties": BOOL},
        "anchors": {"type": "object"},
        "oracle": _obj({"n_envs": INT, "max_abs_gap": NUM}),
    }),
    "sweep.json": _obj({"n_points": INT, "max_relative_gap": NUM, "all_signs_ok": BOOL}),
    "spells.json": _obj({"groups": {"type": "object", "additionalProperties": _obj({
        "hazard": NUM, "se": NUM, "lambda": NUM, "z": NUM, "n_spells": INT, "mean_duration": NUM,
    })}, "seed": INT}),
    "beliefs.json": _obj({
        "n": INT, "seed": INT,
        "fits": {"type": "object"},
        "signs": _obj({"gamma_positive": BOOL, "alpha_negative": BOOL}),
    }),
    "report.json": _obj({"criteria": {"type": "array", "items": _obj({
        "id": INT, "name": STR, "status": {"enum": ["pass", "fail", "missing", "not-evaluated"]},
    })}}),
}

CSV_CONTRACTS = {
    # file -> (required ordered columns, optional trailing columns)
    "students.csv": (STUDENT_COLUMNS, MOVER_COLUMNS),
    "provinces.csv": (PROVINCE_COLUMNS, []),
    "exposures.csv": (["student_id", "degree_id", "cohort", "gender", *EXPOSURE_COLUMNS], []),
    "shock_stats.csv": (["degree_id", "characteristic", "z_value", "relative_z", "degree_mean", "T_max",
                         "relative_undefined"], []),
    "coefficients.csv": (["term"], None),
    "sweep.csv": (["beta", "theta", "alpha", "gamma"], None),
    "survey.csv": (["respondent", "field", "alpha_pct", "gamma_pct", "model_accept_pct", "accept_pct"], []),
}


def clean(obj):
    """JSON-ready copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def validate_json(name, data):
    schema = JSON_SCHEMAS.get(name)
    if schema is None:
        return
    try:
        jsonschema.validate(data, schema)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaError(f"{name} violates its schema at '{path}': {exc.message}") from exc


def validate_frame(name, frame):
    contract = CSV_CONTRACTS.get(name)
    if contract is None:
        return
    required, optional = contract
    cols = list(frame.columns)
    if cols[:len(required)] != list(required):
        raise SchemaError(f"{name}: expected leading columns {required}, found {cols[:len(required)]}")
    if optional is not None:
        extra = cols[len(required):]
        if extra and extra != list(optional)[:len(extra)]:
            raise SchemaError(f"{name}: unexpected trailing columns {extra}")


class ArtifactWriter:
    """Collects outputs, checks overwrite rules for all of them, then writes."""

    def __init__(self, out_dir, force=False):
        self.out_dir = Path(out_dir)
        self.force = force
        self.pending = []

    def json(self, name, data):
        data = clean(data)
        validate_json(name, data)
        text = json.dumps(data, indent=2, allow_nan=False) + "\n"
        self.pending.append((name, text))

    def csv(self, name, frame):
        validate_frame(name, frame)
        text = frame.to_csv(index=False, lineterminator="\n")
        self.pending.append((name, text))

    def text(self, name, text):
        self.pending.append((name, text))

    def targets(self):
        return [self.out_dir / name for name, _ in self.pending]

    def commit(self):
        existing = [p for p in self.targets() if p.exists()]
        if existing and not self.force:
            raise FileExistsError(", ".join(str(p) for p in existing))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in self.pending:
            (self.out_dir / name).write_text(text, encoding="utf-8")
        return self.targets()


def read_json(directory, name, required=True):
    path = Path(directory) / name
    if not path.is_file():
        if required:
            raise DataContractError(f"missing input artifact {path}")
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    validate_json(name, data)
    return data


def read_csv(directory, name, required=True, **kwargs):
    path = Path(directory) / name
    if not path.is_file():
        if required:
            raise DataContractError(f"missing input artifact {path}")
        return None
    try:
        frame = pd.read_csv(path, **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"cannot parse {path}: {exc}") from exc
    validate_frame(name, frame)
    return frame


def read_panel_frame(directory, with_exposures=True):
    """Students joined with exposures (if present) on the student key."""
    students = read_csv(directory, "students.csv")
    if not with_exposures:
        return students
    exposures = read_csv(directory, "exposures.csv")
    if len(exposures) != len(students) or not np.array_equal(exposures["student_id"].to_numpy(),
                                                             students["student_id"].to_numpy()):
        raise DataContractError("exposures.csv does not match students.csv row for row")
    return pd.concat([students, exposures[EXPOSURE_COLUMNS]], axis=1)
