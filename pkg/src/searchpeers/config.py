"""Preset and specification files (TOML) and builders for the model objects they describe."""

from __future__ import annotations

import sys
from importlib import resources
from pathlib import Path

from .errors import DataContractError, DomainError
from .regression import Specification
from .search import Beliefs, SearchEnvironment, wage_distribution_from_dict
from .synth import Calibration, DgpSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

PRESETS = ("paper", "table9", "null")


def load_preset(name):
    """Parsed contents of a bundled preset."""
    if name not in PRESETS:
        raise DomainError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("searchpeers.presets").joinpath(f"{name}.toml").read_text(encoding="utf-8")
    return tomllib.loads(text)


def load_toml(path):
    path = Path(path)
    if not path.is_file():
        raise DataContractError(f"specification file not found: {path}")
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise DataContractError(f"cannot parse {path}: {exc}") from exc


def merge(base, override):
    """Recursive dict merge; ``override`` wins."""
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def _build(factory, cfg, what):
    try:
        return factory(cfg)
    except TypeError as exc:
        raise DomainError(f"invalid {what} settings: {exc}") from exc


def calibration_from(cfg):
    return _build(lambda c: Calibration(**c), cfg.get("calibration", {}), "calibration")


def dgp_from(cfg):
    return _build(DgpSpec.from_dict, cfg.get("dgp", {}), "dgp")


def environment_from(cfg):
    env = dict(cfg.get("environment", {}))
    if not env:
        raise DomainError("configuration has no [environment] section")
    env["wage_dist"] = wage_distribution_from_dict(env.get("wage_dist", {"family": "uniform"}))
    return _build(lambda c: SearchEnvironment(**c), env, "environment")


def beliefs_from(cfg):
    groups = cfg.get("beliefs", {})
    if not {"L", "H"} <= set(groups):
        raise DomainError("configuration needs [beliefs.L] and [beliefs.H]")
    return tuple(_build(lambda c, g=g: Beliefs(group_label=g, **c), groups[g], f"beliefs.{g}") for g in ("L", "H"))


def specifications_from(cfg):
    """One Specification per outcome listed under [fit]."""
    fit_cfg = dict(cfg.get("fit", {}))
    if not fit_cfg:
        raise DomainError("configuration has no [fit] section")
    outcomes = fit_cfg.pop("outcomes", None)
    if outcomes is None:
        outcomes = [fit_cfg.pop("outcome")] if "outcome" in fit_cfg else []
    if not outcomes:
        raise DomainError("[fit] needs 'outcomes' or 'outcome'")
    return [_build(lambda c, o=o: Specification.from_dict({**c, "outcome": o, "name": c.get("name", "fit")}),
                   fit_cfg, "fit") for o in outcomes]
