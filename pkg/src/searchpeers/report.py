"""Summary of run artifacts against the published anchor numbers.

Each acceptance criterion is judged from the artifact that carries its
evidence. A criterion is ``missing`` when that artifact is absent and
``not-evaluated`` when it is settled by the test suite rather than by a run.
"""

from __future__ import annotations

from .io import read_json
from .synth import OUTCOMES

ANCHORS = {
    "table6_col1": {"loo_female_mean": 0.037, "loo_female_mean_se": 0.013, "loo_male_mean": -0.000,
                    "loo_male_mean_se": 0.010},
    "table5": {"raw_sd_female": 8.50, "residual_sd_female": 1.86},
    "permutation": {"center": 1.57, "low": 1.53, "high": 1.62},
    "quintiles": [2.37, 2.01, 1.91, 1.54, 1.23],
    "table9_accept_pct": {"L": 67.43, "H": 60.39},
}
QUINTILE_TOL = 0.4
PERM_WINDOW = (1.45, 1.70)

CRITERIA = [
    (1, "Trivial anchors", "solve.json"),
    (2, "Oracle equivalence", "solve.json"),
    (3, "Comparative statics sweep", "sweep.json"),
    (4, "Belief-gap ordering", "solve.json"),
    (5, "Monte Carlo hazard", "spells.json"),
    (6, "Estimator recovery", "fit.json"),
    (7, "Randomization-inference anchor", "permutation.json"),
    (8, "Variance shrinkage by size quintile", "residual_variation.json"),
    (9, "FWL and standardization invariants", None),
    (10, "Balancing-suite size", None),
    (11, "Pseudo-survey slope signs", "beliefs.json"),
]


def _seconds(doc, key):
    return (doc.get("metadata") or {}).get(key)


def _c1(art):
    anchors = art["solve.json"]["anchors"]
    worst = max(a["abs_gap"] for a in anchors.values())
    per_solve = _seconds(art["solve.json"], "seconds_per_anchor_solve")
    ok = worst <= 1e-9 and (per_solve is None or per_solve < 1e-3)
    return ok, {"max_abs_gap": worst, "seconds_per_solve": per_solve}


def _c2(art):
    oracle = art["solve.json"]["oracle"]
    seconds = _seconds(art["solve.json"], "seconds_oracle")
    ok = oracle["n_envs"] >= 20 and oracle["max_abs_gap"] <= 1e-4 and (seconds is None or seconds < 10)
    return ok, {**oracle, "seconds": seconds}


def _c3(art):
    sw = art["sweep.json"]
    ok = sw["n_points"] >= 243 and sw["max_relative_gap"] <= 1e-4 and sw["all_signs_ok"]
    return ok, {k: sw[k] for k in ("n_points", "max_relative_gap", "all_signs_ok")}


def _c4(art):
    s = art["solve.json"]
    return all(s["orderings"].values()), {
        "R_L": s["R_L"], "R_H": s["R_H"], "lambda_L": s["lambda_L"], "lambda_H": s["lambda_H"],
        "accept_pt_L": s["accept_pt_L"], "accept_pt_H": s["accept_pt_H"],
        "published_accept_pct": ANCHORS["table9_accept_pct"],
    }


def _c5(art):
    groups = art["spells.json"]["groups"]
    seconds = _seconds(art["spells.json"], "seconds_per_group") or {}
    ok = all(abs(g["z"]) <= 3 and g["n_spells"] >= 100_000 for g in groups.values())
    ok = ok and all(v < 5 for v in seconds.values())
    return ok, {k: {"hazard": g["hazard"], "lambda": g["lambda"], "z": g["z"]} for k, g in groups.items()}


def _c6(art):
    fits = art["fit.json"]["specifications"]
    match = [f for f in fits if f["result"]["outcome"] == "log_earnings"]
    if not match:
        return None, {"note": "no log_earnings specification in fit.json"}
    terms = match[0]["result"]["terms"]
    planted = {"loo_female_mean": 0.037, "loo_male_mean": 0.0}
    truth = art.get("truth.json")
    if truth:
        p = truth["planted"]["log_earnings"]
        planted = {"loo_female_mean": p["female_peer"], "loo_male_mean": p["male_peer"]}
    detail, ok = {}, True
    for name, target in planted.items():
        t = terms[name]
        z = (t["coef"] - target) / t["se"]
        detail[name] = {"coef": t["coef"], "se": t["se"], "planted": target, "z": z}
        ok = ok and abs(z) <= 2
    seconds = _seconds(art["fit.json"], "seconds_per_fit")
    if seconds:
        ok = ok and max(seconds) < 60
    return ok, detail


def _c7(art):
    perm = art["permutation.json"]
    ok = perm["n_draws"] >= 500 and PERM_WINDOW[0] <= perm["mean"] <= PERM_WINDOW[1]
    return ok, {k: perm[k] for k in ("mean", "min", "max", "observed", "percentile", "n_draws")} | {
        "published": ANCHORS["permutation"]}


def _c8(art):
    exp = art["residual_variation.json"]["exposures"].get("loo_female_mean")
    if exp is None:
        return None, {"note": "female exposure not diagnosed"}
    q = [row["residual_sd"] for row in sorted(exp["quintiles"], key=lambda r: r["quintile"])]
    decreasing = all(a > b for a, b in zip(q, q[1:]))
    close = len(q) == 5 and all(abs(a - b) <= QUINTILE_TOL for a, b in zip(q, ANCHORS["quintiles"]))
    return decreasing and close, {"residual_sd": q, "published": ANCHORS["quintiles"], "strictly_decreasing": decreasing}


def _c11(art):
    signs = art["beliefs.json"]["signs"]
    return signs["gamma_positive"] and signs["alpha_negative"], signs


JUDGES = {1: _c1, 2: _c2, 3: _c3, 4: _c4, 5: _c5, 6: _c6, 7: _c7, 8: _c8, 11: _c11}


def load_artifacts(directory):
    names = {src for _, _, src in CRITERIA if src} | {"truth.json", "balance.json", "flags.json"}
    return {n: read_json(directory, n, required=False) for n in sorted(names)}


def evaluate(artifacts):
    rows = []
    for cid, name, source in CRITERIA:
        if source is None:
            note = "covered by the property and replication tests"
            if cid == 10 and artifacts.get("balance.json"):
                note += f"; single-panel rejection rate {artifacts['balance.json']['rejection_rate_5pct']:.3f}"
            rows.append({"id": cid, "name": name, "status": "not-evaluated", "detail": {"note": note}})
            continue
        if artifacts.get(source) is None:
            rows.append({"id": cid, "name": name, "status": "missing", "detail": {"artifact": source}})
            continue
        ok, detail = JUDGES[cid](artifacts)
        status = "not-evaluated" if ok is None else ("pass" if ok else "fail")
        rows.append({"id": cid, "name": name, "status": status, "detail": detail})
    return rows


def _fmt(x, nd=3):
    return "n/a" if x is None else f"{x:.{nd}f}"


def coefficient_table(fit_doc, treatments=("loo_female_mean", "loo_male_mean")):
    """Treatments by outcomes, ``coef (se)`` strings."""
    by_outcome = {f["result"]["outcome"]: f["result"]["terms"] for f in fit_doc["specifications"]}
    outcomes = [o for o in OUTCOMES if o in by_outcome] + [o for o in by_outcome if o not in OUTCOMES]
    rows = []
    for t in treatments:
        cells = []
        for o in outcomes:
            term = by_outcome[o].get(t)
            cells.append("" if term is None else f"{term['coef']:.3f} ({term['se']:.3f})")
        rows.append((t, cells))
    return outcomes, rows


def markdown(artifacts, rows):
    lines = ["# Run report", "", "## Acceptance criteria", "", "| # | criterion | status |", "|---|---|---|"]
    lines += [f"| {r['id']} | {r['name']} | {r['status']} |" for r in rows]
    fit_doc = artifacts.get("fit.json")
    if fit_doc:
        outcomes, table = coefficient_table(fit_doc)
        lines += ["", "## Peer-effect estimates (standardized, cluster-robust SE)", "",
                  "| | " + " | ".join(outcomes) + " |", "|---" * (len(outcomes) + 1) + "|"]
        lines += [f"| {t} | " + " | ".join(cells) + " |" for t, cells in table]
        lines += ["", "Published column 1 (log earnings): female peers 0.037 (0.013), male peers -0.000 (0.010)."]
    rv = artifacts.get("residual_variation.json")
    if rv:
        lines += ["", "## Raw and residual variation of peer exposure", "",
                  "| exposure | raw SD | residual SD | cells |", "|---|---|---|---|"]
        for name, e in rv["exposures"].items():
            lines.append(f"| {name} | {_fmt(e['raw_sd'], 2)} | {_fmt(e['residual_sd'], 2)} | {e['n_cells']} |")
        female = rv["exposures"].get("loo_female_mean")
        if female:
            lines += ["", "| size quintile | residual SD | published |", "|---|---|---|"]
            for row, pub in zip(sorted(female["quintiles"], key=lambda r: r["quintile"]), ANCHORS["quintiles"]):
                lines.append(f"| {row['quintile']} | {_fmt(row['residual_sd'], 2)} | {pub:.2f} |")
    solve = artifacts.get("solve.json")
    if solve:
        lines += ["", "## Search model: low- vs high-FLFP beliefs", "", "| | L | H |", "|---|---|---|",
                  f"| reservation earnings R | {_fmt(solve['R_L'], 4)} | {_fmt(solve['R_H'], 4)} |",
                  f"| job-finding rate | {_fmt(solve['lambda_L'], 4)} | {_fmt(solve['lambda_H'], 4)} |",
                  f"| part-time acceptance | {_fmt(solve['accept_pt_L'], 4)} | {_fmt(solve['accept_pt_H'], 4)} |",
                  "| published acceptance (%) | 67.43 | 60.39 |"]
    perm = artifacts.get("permutation.json")
    if perm:
        lines += ["", "## Randomization inference", "",
                  f"Permutation residual SD: mean {perm['mean']:.3f}, range {perm['min']:.3f} to {perm['max']:.3f} "
                  f"over {perm['n_draws']} draws; observed {perm['observed']:.3f} (percentile {perm['percentile']:.1f}). "
                  "Published: centred at 1.57, range 1.53 to 1.62."]
    return "\n".join(lines) + "\n"


def build_report(directory):
    artifacts = load_artifacts(directory)
    rows = evaluate(artifacts)
    return {"criteria": rows}, markdown(artifacts, rows)
