"""Command-line front end: ``searchpeers <subcommand> [options]``.

Exit codes: 0 success, 1 usage error (bad flags, bad values, refusing to
overwrite), 2 data or contract violation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import time
import warnings

import numpy as np
import pandas as pd

from . import config, io, peer_metrics, regression, report, search, synth
from .errors import DataContractError, DomainError, NumericalError

OUT_ENV = "PEERSEARCH_OUT"
STOCHASTIC = {"synth", "permute", "spells", "beliefs"}
ANCHOR_REPEATS = 2000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _metadata(**timings):
    return {"created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            "version": _version(), **timings}


def _version():
    from . import __version__
    return __version__


def _settings(args):
    cfg = config.load_preset(args.preset)
    if args.spec:
        cfg = config.merge(cfg, config.load_toml(args.spec))
    return cfg


def _input_dir(args):
    return args.input or args.out


def _panel(args):
    return io.read_panel_frame(_input_dir(args))


# -- subcommands ---------------------------------------------------------------

def cmd_synth(args, cfg, writer):
    spec, cal = config.dgp_from(cfg), config.calibration_from(cfg)
    t0 = time.perf_counter()
    make = synth.generate_mover_sample if args.movers else synth.generate_panel
    panel = make(spec, cal, args.seed)
    truth = {**panel.truth, "metadata": _metadata(seconds=time.perf_counter() - t0)}
    writer.csv("students.csv", panel.students)
    writer.csv("provinces.csv", panel.provinces)
    writer.json("truth.json", truth)


def cmd_exposures(args, cfg, writer):
    students = io.read_csv(_input_dir(args), "students.csv")
    out = peer_metrics.compute_exposures(students)
    writer.csv("exposures.csv", out[["student_id", "degree_id", "cohort", "gender", *peer_metrics.EXPOSURE_COLUMNS]])


def cmd_diagnose(args, cfg, writer):
    df = _panel(args)
    exposures = {c: peer_metrics.residual_variation(df, c).to_dict() for c in ("loo_female_mean", "loo_male_mean")}
    shocks = pd.concat([peer_metrics.shock_statistics(df, c) for c in peer_metrics.SHOCK_CHARACTERISTICS],
                       ignore_index=True)
    writer.json("residual_variation.json", {"exposures": exposures})
    writer.csv("shock_stats.csv", shocks)
    writer.json("flags.json", peer_metrics.flag_size_trends(df).to_dict())
    writer.text("diagnose.md", _variation_block(exposures))


def _variation_block(exposures):
    lines = ["| exposure | raw SD | residual SD | cells |", "|---|---|---|---|"]
    lines += [f"| {k} | {v['raw_sd']:.2f} | {v['residual_sd']:.2f} | {v['n_cells']} |" for k, v in exposures.items()]
    lines += ["", "| size quintile | cell sizes | residual SD (female peers) |", "|---|---|---|"]
    for q in exposures["loo_female_mean"]["quintiles"]:
        lines.append(f"| {q['quintile']} | {q['min_size']}-{q['max_size']} | {q['residual_sd']:.2f} |")
    return "\n".join(lines) + "\n"


def cmd_fit(args, cfg, writer):
    df = _panel(args)
    specs, seconds, out = config.specifications_from(cfg), [], []
    for spec in specs:
        t0 = time.perf_counter()
        res = regression.fit(df, spec)
        seconds.append(time.perf_counter() - t0)
        d = res.to_dict()
        d.pop("cov")
        out.append({"spec": spec.to_dict(), "result": d})
    table = {"term": list(specs[0].treatments)}
    for item in out:
        terms = item["result"]["terms"]
        o = item["result"]["outcome"]
        table[o] = [terms[t]["coef"] for t in table["term"]]
        table[f"{o}_se"] = [terms[t]["se"] for t in table["term"]]
    writer.json("fit.json", {"specifications": out, "metadata": _metadata(seconds_per_fit=seconds)})
    writer.csv("coefficients.csv", pd.DataFrame(table))


def cmd_balance(args, cfg, writer):
    df = _panel(args)
    bal = cfg.get("balance", {})
    spec = config.specifications_from(cfg)[0]
    spec = spec.with_(sample=bal.get("sample", spec.sample))
    covs = bal.get("covariates", regression.PREDETERMINED)
    t0 = time.perf_counter()
    rep = regression.balance_suite(df, spec, covs)
    writer.json("balance.json", {**rep.to_dict(), "metadata": _metadata(seconds=time.perf_counter() - t0)})


def cmd_permute(args, cfg, writer):
    df = _panel(args)
    perm = cfg.get("permute", {})
    draws = args.draws or perm.get("draws", 500)
    strata = perm.get("strata", "degree_id") or None
    t0 = time.perf_counter()
    res = regression.randomization_inference(df, draws, args.seed, strata=strata, threads=args.threads)
    writer.json("permutation.json", {**res.to_dict(), "metadata": _metadata(seconds=time.perf_counter() - t0)})


def _anchor(env, bel):
    t0 = time.perf_counter()
    for _ in range(ANCHOR_REPEATS):
        pol = search.solve_reservation_earnings(env, bel)
    return pol, (time.perf_counter() - t0) / ANCHOR_REPEATS


def cmd_solve(args, cfg, writer):
    env = config.environment_from(cfg)
    bel_L, bel_H = config.beliefs_from(cfg)
    gap = search.belief_gap_experiment(env, bel_L, bel_H)

    anchors, per_solve = {}, []
    for name, e, b in (("alpha_zero", env, search.Beliefs(0.0, bel_L.gamma)),
                       ("beta_tiny", env.with_(beta=1e-12), bel_L)):
        pol, sec = _anchor(e, b)
        anchors[name] = {"R": pol.R, "b": e.b, "abs_gap": abs(pol.R - e.b)}
        per_solve.append(sec)

    t0 = time.perf_counter()
    oracle = search.oracle_comparison()
    oracle_sec = time.perf_counter() - t0

    doc = {
        **gap.to_dict(),
        "environment": env.to_dict(),
        "anchors": anchors,
        "oracle": {"n_envs": len(oracle), "max_abs_gap": float(oracle["abs_gap"].max())},
        "metadata": _metadata(seconds_per_anchor_solve=max(per_solve), seconds_oracle=oracle_sec),
    }
    writer.json("solve.json", doc)


def cmd_sweep(args, cfg, writer):
    env = config.environment_from(cfg)
    t0 = time.perf_counter()
    table = search.comparative_statics_sweep(env)
    writer.csv("sweep.csv", table)
    writer.json("sweep.json", {
        "n_points": len(table),
        "max_relative_gap": float(table["max_relative_gap"].max()),
        "all_signs_ok": bool(table["signs_ok"].all()),
        "metadata": _metadata(seconds=time.perf_counter() - t0),
    })


def cmd_spells(args, cfg, writer):
    env = config.environment_from(cfg)
    n = args.draws or cfg.get("spells", {}).get("n", 100_000)
    groups, seconds = {}, {}
    for i, bel in enumerate(config.beliefs_from(cfg)):
        t0 = time.perf_counter()
        sample = search.simulate_spells(env, bel, n, [args.seed, i], threads=args.threads)
        seconds[bel.group_label] = time.perf_counter() - t0
        hazard, se = sample.exit_hazard()
        lam = search.job_finding_rate(env, bel)
        groups[bel.group_label] = {
            "hazard": hazard, "se": se, "lambda": lam, "z": (hazard - lam) / se,
            "n_spells": len(sample), "mean_duration": float(sample.duration.mean()), "R": sample.reservation_earnings,
        }
    writer.json("spells.json", {"groups": groups, "seed": args.seed, "metadata": _metadata(seconds_per_group=seconds)})


def cmd_beliefs(args, cfg, writer):
    env = config.environment_from(cfg)
    n = args.draws or cfg.get("survey", {}).get("n", 2000)
    survey = search.pseudo_survey(env, n, args.seed)
    fits = {}
    for label, groups in (("pooled", None), ("field_fe", "field")):
        res = regression.simple_ols(survey, "accept_pct", ["alpha_pct", "gamma_pct"], groups=groups)
        fits[label] = {t: {"coef": res[t], "se": res.se_of(t)} for t in ("alpha_pct", "gamma_pct")}
    main = fits["field_fe"]
    writer.csv("survey.csv", survey)
    writer.json("beliefs.json", {
        "n": n, "seed": args.seed, "fits": fits,
        "signs": {"gamma_positive": main["gamma_pct"]["coef"] > 0, "alpha_negative": main["alpha_pct"]["coef"] < 0},
    })


def cmd_report(args, cfg, writer):
    doc, md = report.build_report(_input_dir(args))
    writer.json("report.json", {**doc, "metadata": _metadata()})
    writer.text("report.md", md)


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic cohort panel"),
    "exposures": (cmd_exposures, "leave-one-out peer exposures for students.csv"),
    "diagnose": (cmd_diagnose, "residual variation, shock scores and size-trend flags"),
    "fit": (cmd_fit, "estimate the peer-effect specifications"),
    "balance": (cmd_balance, "balancing tests of pre-determined covariates"),
    "permute": (cmd_permute, "randomization inference on the residual exposure SD"),
    "solve": (cmd_solve, "solve the search model for the low/high belief groups"),
    "sweep": (cmd_sweep, "comparative statics over the belief and parameter grid"),
    "spells": (cmd_spells, "Monte Carlo unemployment spells"),
    "beliefs": (cmd_beliefs, "pseudo-survey regressions of acceptance on beliefs"),
    "report": (cmd_report, "summarize a run directory against the published anchors"),
}


def build_parser():
    parser = _Parser(prog="searchpeers", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--preset", default="paper", choices=config.PRESETS)
        p.add_argument("--spec", help="TOML file merged over the preset")
        p.add_argument("--out", default=os.environ.get(OUT_ENV, "runs"),
                       help=f"output directory (default: ${OUT_ENV} or ./runs)")
        p.add_argument("--input", help="directory holding input artifacts (default: --out)")
        p.add_argument("--seed", type=int, required=name in STOCHASTIC)
        p.add_argument("--draws", type=int, help="replications, spells or respondents")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if name == "synth":
            p.add_argument("--movers", action="store_true", help="add work-province and origin-quartile columns")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.threads < 1 or (args.draws is not None and args.draws < 1):
            raise UsageError("--threads and --draws must be positive")
        cfg = _settings(args)
        writer = io.ArtifactWriter(args.out, force=args.force)
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            COMMANDS[args.command][0](args, cfg, writer)
        written = writer.commit()
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except FileExistsError as exc:
        print(f"refusing to overwrite existing outputs (use --force): {exc}", file=sys.stderr)
        return 1
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataContractError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
