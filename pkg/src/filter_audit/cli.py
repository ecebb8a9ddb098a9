"""``filter-audit`` command-line entry point.

Exit status: 0 when the verdict is H0 or the check passes, 2 on H1 or a
failed check, 1 on any error.  ``FILTER_AUDIT_OUT`` supplies the output
directory when ``--out`` is omitted.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .audit import audit_batch, audit_pair, audit_symmetrized
from .config import COMMANDS, RunSpecs, apply_overrides, document_text, read_document, specs_from
from .decisions import Choice, EstimatorSpec, calibrate_eta, decide, decision_rate, distinguishability_probe
from .errors import FilterAuditError
from .montecarlo import run_experiment, summarize
from .platforms import describe_platform, make_platform
from .regcost import cost_of_regulation, diversity_compare, statistic_path, zero_cost_witness
from .reports import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, Report, as_report, emit_report

OUT_ENV = "FILTER_AUDIT_OUT"


def _platform_lines(specs: RunSpecs) -> list:
    return describe_platform(specs.platform).splitlines()


def run_audit(specs: RunSpecs) -> Report:
    platform = make_platform(specs.platform)
    run = audit_symmetrized if specs.symmetrized else audit_pair
    verdict = run(specs.audit, platform, specs.pairs[0], seed=_rng.derive(specs.seed, 0))
    report = as_report(verdict)
    report.payload["symmetrized"] = specs.symmetrized
    report.payload["platform"] = _platform_lines(specs)
    return report


def run_audit_batch(specs: RunSpecs) -> Report:
    platform = make_platform(specs.platform)
    batch = audit_batch(
        specs.audit, platform, specs.pairs, alpha=specs.alpha, seed=_rng.derive(specs.seed, 0),
        workers=specs.workers, symmetrized=specs.symmetrized,
    )
    report = as_report(batch)
    report.payload["symmetrized"] = specs.symmetrized
    report.payload["platform"] = _platform_lines(specs)
    return report


def run_mc(specs: RunSpecs) -> Report:
    points = run_experiment(specs.plan)
    claims = []
    for name, bound, where, series in specs.claims:
        result = summarize(points, bound, where, series).to_dict()
        claims.append({"name": name, "series": series, **result})
    passed = all(c["passed"] for c in claims)
    payload = {
        "experiment": specs.plan.experiment_id.value,
        "parameters": specs.plan.parameters,
        "workers": specs.workers,
        "points": [p.to_dict() for p in points],
        "claims": claims,
        "passed": passed,
    }
    return Report("mc", payload, EXIT_PASS if passed else EXIT_FAIL, curves=points)


def run_cost(specs: RunSpecs) -> Report:
    result = cost_of_regulation(specs.reward, specs.query, specs.axes)
    witness = None
    if specs.theta_star is not None:
        kappa, point = zero_cost_witness(specs.reward, specs.query, specs.theta_star)
        result = dataclasses.replace(result, witness_kappa=kappa)
        witness = [float(t) for t in point]
    report = as_report(result)
    report.payload["witness_theta"] = witness
    report.payload["threshold"] = specs.query.threshold
    return report


def run_diversity(specs: RunSpecs) -> Report:
    d = specs.diversity
    value = diversity_compare(specs.family, d["z0"], d["z1"], d["direction"])
    more = "z0" if value > 0 else "z1" if value < 0 else "neither"
    payload = {"direction": d["direction"], "information_gap": value, "more_diverse": more}
    curves = None
    if "theta_star" in d:
        kappas = np.linspace(0.0, d["kappa_max"], d["points"])
        stats = statistic_path(d["theta_star"], d["query"], d["omega"], kappas)
        threshold = d["query"].threshold
        rows = [[float(k), float(s), threshold, bool(s < threshold)] for k, s in zip(kappas, stats)]
        curves = (("kappa", "statistic", "threshold", "feasible"), rows)
        payload["path_threshold"] = threshold
        payload["first_feasible_kappa"] = next((r[0] for r in rows if r[3]), None)
    return Report("diversity", payload, EXIT_PASS, curves=curves)


def run_decision_demo(specs: RunSpecs) -> Report:
    d = specs.decision
    family = specs.family
    values = d["values"]
    seeds = _rng.split(_rng.derive(specs.seed, 0), 4)
    eta = calibrate_eta(values, family, d["theta0"], d["m"], d["rho"], d["calibration_trials"], seeds[0])
    boundary_fpr = decision_rate(values, family, d["theta0"], EstimatorSpec.mvue(), eta, d["m"], d["trials"], seeds[1])
    probes = []
    panel_seeds = _rng.split(seeds[2], len(d["panel"]))
    for i, spec in enumerate(d["panel"]):
        probe = distinguishability_probe(family, d["theta"], d["theta_prime"], spec, values, eta, d["m"], d["trials"], panel_seeds[i])
        probes.append({"estimator": spec.label, "distinguishability": probe})
    rows = []
    rec_seeds = _rng.split(seeds[3], 2 * d["records"]) if d["records"] else []
    for side, theta in (("x", d["theta"]), ("x_prime", d["theta_prime"])):
        for j in range(d["records"]):
            k = j if side == "x" else d["records"] + j
            feed = family.sample(theta, d["m"], rec_seeds[k])
            belief = EstimatorSpec.mvue().beliefs(family, feed.scalars(), None)
            rec = decide(values, belief, eta, query_id=f"{side}-{j}")
            rows.append([rec.query_id, side, rec.choice.value, rec.score, rec.eta])
    a1 = {side: sum(1 for r in rows if r[1] == side and r[2] == Choice.A1.value) for side in ("x", "x_prime")}
    payload = {
        "eta": eta,
        "rho": d["rho"],
        "boundary_fpr": boundary_fpr,
        "within_premises": values.within_premises(family),
        "probes": probes,
        "record_a1_counts": a1,
    }
    curves = (("index", "estimator", "distinguishability"), [[i, p["estimator"], p["distinguishability"]] for i, p in enumerate(probes)])
    extra = {"decisions.csv": (("query_id", "side", "choice", "score", "eta"), rows)}
    return Report("decision-demo", payload, EXIT_PASS, curves=curves, extra_csv=extra)


RUNNERS = {
    "audit": run_audit,
    "audit-batch": run_audit_batch,
    "mc": run_mc,
    "cost": run_cost,
    "diversity": run_diversity,
    "decision-demo": run_decision_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="filter-audit", description="Counterfactual audits of content-filtering platforms.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="config file (INI-style key = value)")
    parser.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value; repeatable")
    return parser


def execute(command: str, config_text: str, outdir: str, overrides: Sequence[str] = ()) -> tuple:
    """Parse, run and write reports; return ``(paths, exit_status)``."""
    cp = read_document(config_text)
    apply_overrides(cp, overrides)
    specs = specs_from(cp, command)
    if not os.path.isdir(outdir) or not os.access(outdir, os.W_OK):
        raise FilterAuditError(f"output directory {outdir} is missing or not writable")
    report = RUNNERS[command](specs)
    return emit_report(report, outdir, document_text(cp), specs.seed, command)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    outdir = args.out or os.environ.get(OUT_ENV)
    try:
        if not outdir:
            raise FilterAuditError(f"no output directory: pass --out or set {OUT_ENV}")
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise FilterAuditError(f"cannot read config {args.config}: {exc.strerror or exc}") from None
        paths, status = execute(args.command, text, outdir, args.overrides)
    except (FilterAuditError, ValueError, OSError) as exc:
        print(f"filter-audit: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for p in paths:
        print(p)
    return status


if __name__ == "__main__":
    sys.exit(main())
