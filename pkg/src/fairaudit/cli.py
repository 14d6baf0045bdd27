"""Command line interface.

Subcommands: audit (criteria, sweep, calibration, impossibility),
impact (penalty-gap analysis), region (feasible-region export), regress
(false-positive regressions), synth (synthetic population generation).

Reports are deterministic: identical inputs, flags, and seeds produce
byte-identical output. Exit codes: 0 success, 2 data error, 3 config
error, 4 internal error. All numbers in a report come from module
calls; the CLI only dispatches and serializes.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from dataclasses import asdict
from typing import Any, Sequence

from . import __version__, fairness, impact, metrics, regress, synth, tradeoff
from .dataset import Dataset, LoadConfig, apply_propublica_filters, load_csv, write_csv, write_schema_config
from .errors import ConfigError, DataError


# ---------------------------------------------------------------------------
# serialization helpers

def _interval_dict(iv: metrics.Interval) -> dict[str, float]:
    return {"lo": iv.lo, "hi": iv.hi, "level": iv.level}


def _metrics_dict(gm: metrics.GroupMetrics) -> dict[str, Any]:
    return {
        "group": gm.group,
        "threshold": gm.threshold,
        "matrix": asdict(gm.matrix),
        "n": gm.matrix.total,
        "prevalence": gm.prevalence,
        "ppv": gm.ppv,
        "fpr": gm.fpr,
        "fnr": gm.fnr,
        "high_risk_rate": gm.high_risk_rate,
        "intervals": {name: _interval_dict(iv) for name, iv in gm.intervals.items()},
    }


def _criterion_dict(cr: fairness.CriterionResult) -> dict[str, Any]:
    return {
        "criterion": cr.criterion,
        "threshold": cr.threshold,
        "groups": list(cr.groups),
        "values": {g: {str(k): v for k, v in vals.items()} for g, vals in cr.values.items()},
        "gaps": dict(cr.gaps),
        "max_abs_gap": cr.max_abs_gap,
        "tolerance": cr.tolerance,
        "satisfied": cr.satisfied,
        "notes": list(cr.notes),
    }


def _provenance_dict(ds: Dataset) -> dict[str, Any]:
    return {
        "source": ds.provenance.source,
        "filters": list(ds.provenance.filters),
        "n_records": ds.n,
        "group_counts": ds.group_counts(),
        "score_range": [ds.schema.score_min, ds.schema.score_max],
    }


def _dump_json(payload: Any, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _dump_csv(rows: list[dict[str, Any]], columns: list[str], out: str | None) -> None:
    def write(fh) -> None:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(["" if row.get(c) is None else str(row.get(c)) for c in columns])

    if out is None:
        write(sys.stdout)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            write(fh)


def _load(args: argparse.Namespace) -> Dataset:
    if not args.input or not args.schema:
        raise ConfigError("this command needs both --input and --schema")
    ds = load_csv(args.input, args.schema)
    if getattr(args, "propublica_filters", False):
        ds = apply_propublica_filters(ds)
    return ds


def _tool_dict() -> dict[str, str]:
    return {"name": "fairaudit", "version": __version__}


# ---------------------------------------------------------------------------
# audit

def cmd_audit(args: argparse.Namespace) -> int:
    ds = _load(args)
    two_groups = len(ds.groups_present()) >= 2
    report: dict[str, Any] = {
        "tool": _tool_dict(),
        "parameters": {
            "input": args.input,
            "schema": args.schema,
            "ci_level": args.ci,
            "tolerance": args.tolerance,
            "cutoff": args.cutoff,
            "propublica_filters": bool(args.propublica_filters),
            "seed": None,
        },
        "provenance": _provenance_dict(ds),
    }

    sweep = metrics.threshold_sweep(ds, args.ci)
    report["threshold_sweep"] = [_metrics_dict(gm) for gm in sweep]

    curves = metrics.calibration_curve(ds, args.ci)
    cells = {
        group: {
            str(score): {
                "count": cell.count,
                "positives": cell.positives,
                "estimate": cell.estimate,
                "interval": _interval_dict(cell.interval),
            }
            for score, cell in per_score.items()
        }
        for group, per_score in curves.items()
    }

    if not two_groups:
        absent = {
            "status": "skipped",
            "reason": f"comparisons need two groups present, found {len(ds.groups_present())}",
        }
        report["calibration"] = {**absent, "cells": cells}
        report["criteria_by_cutoff"] = []
        report["impossibility"] = absent
        _dump_output(args, report)
        return 0

    calibration = _criterion_dict(fairness.check_calibration(ds, args.tolerance, args.ci))
    calibration["cells"] = cells
    report["calibration"] = calibration

    by_cutoff = []
    for s_hr in metrics.sweep_cutoffs(ds):
        entry: dict[str, Any] = {"cutoff": s_hr}
        for name, check in (
            ("predictive_parity", fairness.check_predictive_parity),
            ("error_rate_balance", fairness.check_error_rate_balance),
            ("statistical_parity", fairness.check_statistical_parity),
        ):
            try:
                entry[name] = _criterion_dict(check(ds, s_hr, args.tolerance, args.ci))
            except DataError as exc:
                entry[name] = {"status": "undefined", "reason": str(exc)}
        by_cutoff.append(entry)
    report["criteria_by_cutoff"] = by_cutoff

    g_b, g_w = ds.groups_present()[:2]
    try:
        finding = fairness.impossibility_report(
            metrics.group_metrics(ds, g_b, args.cutoff, args.ci),
            metrics.group_metrics(ds, g_w, args.cutoff, args.ci),
            args.tolerance,
        )
        report["impossibility"] = asdict(finding)
    except DataError as exc:
        report["impossibility"] = {"status": "undefined", "reason": str(exc)}

    _dump_output(args, report)
    return 0


def _dump_output(args: argparse.Namespace, report: dict[str, Any]) -> None:
    if args.format == "json":
        _dump_json(report, args.out)
        return
    # CSV format: the threshold sweep as a flat table.
    rows = []
    for gm_dict in report["threshold_sweep"]:
        row: dict[str, Any] = {
            "group": gm_dict["group"],
            "cutoff": gm_dict["threshold"],
            **{k: gm_dict["matrix"][k] for k in ("tn", "fp", "fn", "tp")},
        }
        for rate in ("prevalence", "ppv", "fpr", "fnr", "high_risk_rate"):
            row[rate] = gm_dict[rate]
            iv = gm_dict["intervals"].get(rate)
            row[f"{rate}_lo"] = iv["lo"] if iv else None
            row[f"{rate}_hi"] = iv["hi"] if iv else None
        rows.append(row)
    columns = ["group", "cutoff", "tn", "fp", "fn", "tp"]
    for rate in ("prevalence", "ppv", "fpr", "fnr", "high_risk_rate"):
        columns.extend([rate, f"{rate}_lo", f"{rate}_hi"])
    _dump_csv(rows, columns, args.out)


# ---------------------------------------------------------------------------
# impact

def _policy_from_args(args: argparse.Namespace, ds: Dataset) -> impact.PenaltyPolicy:
    if args.tmin is None or args.tmax is None:
        raise ConfigError("impact needs --tmin and --tmax")
    if args.policy == "minmax":
        return impact.PenaltyPolicy.minmax(args.tmin, args.tmax, args.cutoff)
    return impact.PenaltyPolicy.interpolation(
        args.tmin, args.tmax, ds.schema.score_min, ds.schema.score_max
    )


def _impact_report_dict(rep: impact.ImpactReport) -> dict[str, Any]:
    out = asdict(rep)
    out["policy"] = asdict(rep.policy)
    return out


def cmd_impact(args: argparse.Namespace) -> int:
    ds = _load(args)
    policy = _policy_from_args(args, ds)
    g_pair = None
    report: dict[str, Any] = {
        "tool": _tool_dict(),
        "parameters": {
            "input": args.input,
            "schema": args.schema,
            "policy": asdict(policy),
            "cutoff": args.cutoff if args.policy == "minmax" else None,
            "propublica_filters": bool(args.propublica_filters),
            "sentencing_config": args.sentencing_config,
        },
        "provenance": _provenance_dict(ds),
    }

    distribution: dict[str, Any] = {}
    try:
        distribution["cohens_d"] = impact.cohens_d(ds)
    except DataError as exc:
        distribution["cohens_d"] = None
        distribution["cohens_d_note"] = str(exc)
    try:
        present = ds.groups_present()
        if len(present) < 2:
            raise DataError(f"needs two groups present, found {len(present)}")
        g_b, g_w = present[0], present[1]
        g_pair = (g_b, g_w)
        distribution["groups"] = [g_b, g_w]
        distribution["tv_unconditional"] = impact.tv_distance(
            impact.score_distribution(ds, g_b), impact.score_distribution(ds, g_w)
        )
        for y in (0, 1):
            try:
                distribution[f"tv_y{y}"] = impact.tv_distance(
                    impact.score_distribution(ds, g_b, y),
                    impact.score_distribution(ds, g_w, y),
                )
            except DataError as exc:
                distribution[f"tv_y{y}"] = None
                distribution[f"tv_y{y}_note"] = str(exc)
    except DataError as exc:
        distribution["note"] = str(exc)
    report["distribution"] = distribution

    combos = []
    if args.y1 is not None or args.y2 is not None:
        if args.y1 is None or args.y2 is None:
            raise ConfigError("give both --y1 and --y2, or neither")
        pairs = [(args.y1, args.y2)]
    else:
        pairs = [(0, 0), (1, 1), (0, 1), (1, 0)]
    for y1, y2 in pairs:
        try:
            combos.append(_impact_report_dict(impact.delta(ds, policy, y1, y2)))
        except DataError as exc:
            combos.append({"y1": y1, "y2": y2, "status": "undefined", "reason": str(exc)})
    report["delta"] = combos

    sentencing_dict = None
    if args.sentencing_config:
        cfg = impact.SentencingConfig.from_file(args.sentencing_config)
        analysis = impact.sentencing_analysis(
            ds, cfg, kind=args.policy,
            s_hr=args.cutoff if args.policy == "minmax" else None,
            groups=g_pair,
        )
        sentencing_dict = {
            "policy_kind": analysis.policy_kind,
            "s_hr": analysis.s_hr,
            "group_b": analysis.group_b,
            "group_w": analysis.group_w,
            "alpha": analysis.alpha,
            "excluded_missing": analysis.excluded_missing,
            "ranges": {label: list(rng) for label, rng in analysis.ranges.items()},
            "cells": [asdict(cell) for cell in analysis.cells],
            "deltas": [asdict(d) for d in analysis.deltas],
        }
    report["sentencing"] = sentencing_dict

    if args.format == "json":
        _dump_json(report, args.out)
        return 0
    if sentencing_dict is not None:
        cell_columns = ["ogs", "group", "outcome", "n", "mean_penalty"]
        _dump_csv(sentencing_dict["cells"], cell_columns, args.out)
        delta_columns = ["ogs", "outcome", "n_b", "n_w", "delta", "welch_t", "p_value", "significant"]
        delta_out = None if args.out is None else args.out + ".deltas.csv"
        _dump_csv(sentencing_dict["deltas"], delta_columns, delta_out)
        return 0
    columns = ["y1", "y2", "group_b", "group_w", "n_b", "n_w", "mean_b", "mean_w",
               "delta_empirical", "delta_closed_form", "tv_bound", "status", "reason"]
    _dump_csv(combos, columns, args.out)
    return 0


# ---------------------------------------------------------------------------
# region

def cmd_region(args: argparse.Namespace) -> int:
    deltas = _parse_float_list(args.delta_band, "--delta-band")
    if args.resolution < 2:
        raise ConfigError("--resolution must be at least 2")
    points: list[dict[str, Any]] = []
    if args.prevalence is not None or args.ppv is not None:
        if args.prevalence is None or args.ppv is None:
            raise ConfigError("give both --prevalence and --ppv, or neither")
        prevalence, ppv_center = args.prevalence, args.ppv
        source: dict[str, Any] = {"mode": "explicit"}
    else:
        ds = _load(args)
        present = ds.groups_present()
        if len(present) < 2:
            raise DataError(f"region from data needs two groups, found {len(present)}")
        g_b, g_w = present[0], present[1]
        m_b = metrics.group_metrics(ds, g_b, args.cutoff, args.ci)
        m_w = metrics.group_metrics(ds, g_w, args.cutoff, args.ci)
        if m_b.prevalence is None or m_w.ppv is None:
            raise DataError("prevalence of the first group and PPV of the second must be defined")
        prevalence, ppv_center = m_b.prevalence, m_w.ppv
        source = {"mode": "data", "group_b": g_b, "group_w": g_w, "cutoff": args.cutoff}
        for m in (m_b, m_w):
            if m.fnr is not None and m.fpr is not None:
                points.append({"kind": "point", "delta": None, "group": m.group,
                               "fnr": m.fnr, "fpr_lower": m.fpr, "fpr_upper": m.fpr})

    grid = [i / (args.resolution - 1) for i in range(args.resolution)]
    rows: list[dict[str, Any]] = []
    line = tradeoff.feasible_line(prevalence, ppv_center)
    for fnr in grid:
        fpr = min(line.fpr_at(fnr), 1.0)
        rows.append({"kind": "line", "delta": 0.0, "group": None,
                     "fnr": fnr, "fpr_lower": fpr, "fpr_upper": fpr})
    for delta in deltas:
        region = tradeoff.feasible_region(prevalence, ppv_center, delta)
        for fnr in grid:
            lo, hi = region.bounds_at(fnr)
            rows.append({"kind": "band", "delta": delta, "group": None,
                         "fnr": fnr, "fpr_lower": lo, "fpr_upper": hi})
    rows.extend(points)

    if args.format == "json":
        payload = {
            "tool": _tool_dict(),
            "parameters": {"prevalence": prevalence, "ppv_center": ppv_center,
                           "delta_band": deltas, "resolution": args.resolution,
                           "source": source},
            "rows": rows,
        }
        _dump_json(payload, args.out)
        return 0
    _dump_csv(rows, ["kind", "delta", "group", "fnr", "fpr_lower", "fpr_upper"], args.out)
    return 0


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag}: cannot parse {text!r}") from exc
    if not values:
        raise ConfigError(f"{flag}: no values given")
    if any(v < 0 for v in values):
        raise ConfigError(f"{flag}: values must be non-negative")
    return values


# ---------------------------------------------------------------------------
# regress

def _fit_dict(design: regress.Design, fit: regress.FitResult) -> dict[str, Any]:
    return {
        "columns": list(design.columns),
        "cutoff": design.cutoff,
        "n": fit.n,
        "n_excluded_missing": design.n_excluded_missing,
        "coefficients": [asdict(c) for c in fit.coefficients],
        "odds_ratios": {
            c.name: regress.odds_ratio(fit, c.name)
            for c in fit.coefficients if c.name != "(Intercept)"
        },
        "converged": fit.converged,
        "iterations": fit.iterations,
        "log_likelihood": fit.log_likelihood,
        "separation": fit.separation,
    }


def cmd_regress(args: argparse.Namespace) -> int:
    ds = _load(args)
    config = LoadConfig.from_file(args.schema)
    spec = regress.DesignSpec.from_config(config.raw)
    if args.cutoff is not None:
        spec = regress.DesignSpec(predictors=spec.predictors, cutoff=args.cutoff)

    wanted = ("reduced", "full") if args.model == "both" else (args.model,)
    models: dict[str, Any] = {}
    for which in wanted:
        model_spec = spec
        if which == "reduced":
            model_spec = regress.DesignSpec(predictors=spec.predictors[:1], cutoff=spec.cutoff)
        design = regress.build_design(ds, model_spec)
        fit = regress.fit_logistic(design)
        if not fit.converged:
            sys.stderr.write(f"warning: {which} model did not converge\n")
        models[which] = _fit_dict(design, fit)

    report = {
        "tool": _tool_dict(),
        "parameters": {"input": args.input, "schema": args.schema,
                       "cutoff": spec.cutoff, "model": args.model,
                       "propublica_filters": bool(args.propublica_filters)},
        "provenance": _provenance_dict(ds),
        "models": models,
    }
    if args.format == "json":
        _dump_json(report, args.out)
        return 0
    rows = []
    for which, model in models.items():
        for coef in model["coefficients"]:
            rows.append({"model": which, "name": coef["name"],
                         "estimate": coef["estimate"], "std_error": coef["std_error"],
                         "z_value": coef["z_value"], "p_value": coef["p_value"]})
    _dump_csv(rows, ["model", "name", "estimate", "std_error", "z_value", "p_value"], args.out)
    return 0


# ---------------------------------------------------------------------------
# synth

def cmd_synth(args: argparse.Namespace) -> int:
    if args.spec and args.parity_prevalences:
        raise ConfigError("give --spec or --parity-prevalences, not both")
    if args.spec:
        spec = synth.PopulationSpec.from_file(args.spec)
        if args.seed is not None:
            spec = synth.PopulationSpec(groups=spec.groups, seed=args.seed,
                                        annotations=spec.annotations)
    elif args.parity_prevalences:
        if args.target_ppv is None:
            raise ConfigError("--parity-prevalences needs --target-ppv")
        p_values = _parse_float_list(args.parity_prevalences, "--parity-prevalences")
        if len(p_values) != 2:
            raise ConfigError("--parity-prevalences needs exactly two values")
        support = synth._parse_support(args.support)
        fnrs = None
        if args.fnrs:
            f_values = _parse_float_list(args.fnrs, "--fnrs")
            if len(f_values) != 2:
                raise ConfigError("--fnrs needs exactly two values")
            fnrs = (f_values[0], f_values[1])
        spec = synth.construct_parity_instrument(
            p_values[0], p_values[1], args.cutoff, args.target_ppv, support,
            fnrs=fnrs, seed=args.seed if args.seed is not None else 0,
        )
    else:
        raise ConfigError("synth needs --spec or --parity-prevalences")

    ds = synth.generate(spec, mode=args.mode)
    if not args.out:
        raise ConfigError("synth needs --out")
    write_csv(ds, args.out)
    schema_out = args.schema_out or args.out + ".schema.cfg"
    write_schema_config(ds, schema_out)
    sys.stderr.write(
        f"wrote {ds.n} records to {args.out} (schema config: {schema_out})\n"
    )
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairaudit",
        description="Fairness auditing for threshold-based risk score instruments",
    )
    parser.add_argument("--version", action="version", version=f"fairaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p: argparse.ArgumentParser, input_required: bool = True) -> None:
        p.add_argument("--input", required=input_required, help="CSV data file")
        p.add_argument("--schema", required=input_required,
                       help="loader config mapping canonical fields to CSV columns")
        p.add_argument("--propublica-filters", action="store_true",
                       help="apply the standard two-year cohort restrictions after loading")

    def add_out(p: argparse.ArgumentParser, formats: tuple[str, ...] = ("json", "csv")) -> None:
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=formats, default=formats[0])

    p_audit = sub.add_parser("audit", help="fairness criteria, sweep, calibration, impossibility")
    add_io(p_audit)
    p_audit.add_argument("--cutoff", type=int, default=4, help="cutoff for the impossibility section")
    p_audit.add_argument("--ci", type=float, default=0.95, help="confidence level for intervals")
    p_audit.add_argument("--tolerance", type=float, default=fairness.DEFAULT_TOLERANCE,
                         help="max absolute gap tolerated by each criterion")
    add_out(p_audit)
    p_audit.set_defaults(func=cmd_audit)

    p_impact = sub.add_parser("impact", help="average-penalty gaps under a policy")
    add_io(p_impact)
    p_impact.add_argument("--policy", choices=("minmax", "interpolation"), required=True)
    p_impact.add_argument("--tmin", type=float, required=True, help="penalty floor")
    p_impact.add_argument("--tmax", type=float, required=True, help="penalty ceiling")
    p_impact.add_argument("--cutoff", type=int, default=4, help="cutoff for two-level policies")
    p_impact.add_argument("--y1", type=int, choices=(0, 1), default=None,
                          help="outcome stratum for the first group")
    p_impact.add_argument("--y2", type=int, choices=(0, 1), default=None,
                          help="outcome stratum for the second group")
    p_impact.add_argument("--sentencing-config",
                          help="offense-gravity ranges and charge-degree mapping")
    add_out(p_impact)
    p_impact.set_defaults(func=cmd_impact)

    p_region = sub.add_parser("region", help="feasible (FNR, FPR) lines and bands")
    add_io(p_region, input_required=False)
    p_region.add_argument("--cutoff", type=int, default=4, help="cutoff when reading from data")
    p_region.add_argument("--ci", type=float, default=0.95)
    p_region.add_argument("--prevalence", type=float, default=None,
                          help="explicit prevalence (skip --input)")
    p_region.add_argument("--ppv", type=float, default=None,
                          help="explicit PPV band center (skip --input)")
    p_region.add_argument("--delta-band", default="0.05,0.1,0.125",
                          help="comma-separated PPV half-widths")
    p_region.add_argument("--resolution", type=int, default=101,
                          help="FNR grid points per line")
    add_out(p_region, formats=("csv", "json"))
    p_region.set_defaults(func=cmd_region)

    p_regress = sub.add_parser("regress", help="logistic regressions of false-positive flags")
    add_io(p_regress)
    p_regress.add_argument("--cutoff", type=int, default=None,
                           help="override the config's response cutoff")
    p_regress.add_argument("--model", choices=("reduced", "full", "both"), default="both",
                           help="reduced = first configured predictor only")
    add_out(p_regress)
    p_regress.set_defaults(func=cmd_regress)

    p_synth = sub.add_parser("synth", help="generate a synthetic population CSV")
    p_synth.add_argument("--spec", help="population spec config")
    p_synth.add_argument("--parity-prevalences",
                         help="two prevalences for an equal-PPV instrument, e.g. 0.51,0.39")
    p_synth.add_argument("--target-ppv", type=float, default=None)
    p_synth.add_argument("--fnrs", help="two FNRs for the equal-PPV instrument")
    p_synth.add_argument("--support", default="1:10", help="score support, e.g. 1:10")
    p_synth.add_argument("--cutoff", type=int, default=4)
    p_synth.add_argument("--mode", choices=(synth.EXACT, synth.SAMPLE), default=synth.EXACT)
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--out", help="CSV output path")
    p_synth.add_argument("--schema-out", help="loader config output path (default: <out>.schema.cfg)")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 3
    try:
        return args.func(args)
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return 2
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 3
    except BrokenPipeError:
        return 0
    except Exception:
        sys.stderr.write("internal error:\n")
        traceback.print_exc(file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
