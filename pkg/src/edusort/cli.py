"""Command-line interface.

Every command prints a JSON report (or a CSV for ``table`` and ``synth``)
to stdout, or to ``--out`` when given.  Exit codes: 0 success, 2 input
validation, 3 solver non-convergence, 4 zero-cell policy violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, fixtures
from .calibrate import calibrate
from .counterfactual import CounterfactualSpec, counterfactual_gini, run
from .errors import EduSortError, NotConverged, ZeroCellError
from .income import gini, household_distribution
from .ingest import (
    IncomeModel,
    SampleFilter,
    SynthSpec,
    format_couples,
    format_table,
    generate_synthetic,
    load_couples,
    load_schema,
    load_table,
)
from .standardize import (
    DEFAULT_OBJECTIVE,
    MARGINAL_TOL,
    ObjectiveVariant,
    StandardizationProblem,
    kkt_certificate,
    standardize_ipf,
    standardize_qp,
)
from .tables import (
    AVERAGE,
    HUSBAND,
    WIFE,
    EducationSchema,
    WeightingScheme,
    build_table,
    diagonal_pam,
    interest_factors,
    overall_pam,
    pam_trend,
)

log = logging.getLogger("edusort")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3
EXIT_ZERO_CELL = 4


# ------------------------------------------------------------------ helpers


def resolve_input(name) -> Path:
    """A path on disk, or a packaged fixture referred to by file name."""
    p = Path(name)
    if p.exists():
        return p
    try:
        with_suffix = p.name if p.suffix else p.name + ".csv"
        return Path(str(fixtures.path(with_suffix)))
    except FileNotFoundError:
        raise FileNotFoundError(f"no such file or packaged fixture: {name}") from None


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(args, text: str):
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(args, report: dict):
    _emit(args, json.dumps(jsonable(report), indent=2, allow_nan=False) + "\n")


def _schema(args) -> EducationSchema:
    if args.schema:
        return load_schema(resolve_input(args.schema))
    raise EduSortError("--schema is required with --couples")


def _filter(args) -> SampleFilter:
    return SampleFilter(
        min_age=args.min_age,
        max_age=args.max_age,
        require_both_incomes_present=not args.allow_missing_income,
        first_marriage_only=args.first_marriage_only,
    )


def _couples(args, path):
    loaded = load_couples(resolve_input(path), _schema(args), _filter(args))
    if loaded.rejects:
        log.warning("rejected rows: %s", dict(loaded.rejects))
    return loaded


def _table_from(args):
    """The contingency table named by --table, or built from --couples."""
    if getattr(args, "table", None):
        return load_table(resolve_input(args.table)), None
    if getattr(args, "couples", None):
        loaded = _couples(args, args.couples)
        schema = _schema(args)
        return build_table(loaded.records, schema), loaded
    raise EduSortError("give --table or --couples")


def _standardize(source, target, method, objective, tol, jitter=0.0):
    problem = StandardizationProblem.to_marginals_of(source, target)
    if method == "ipf":
        return problem, standardize_ipf(problem, tol=tol, jitter=jitter)
    return problem, standardize_qp(problem, objective, tol=tol)


def _pam_by_scheme(table, scheme):
    out = {}
    for s in (WIFE, HUSBAND, AVERAGE, scheme):
        out[str(s)] = overall_pam(table, s)
    return out


# ----------------------------------------------------------------- commands


def cmd_table(args):
    table, loaded = _table_from(args)
    _emit(args, format_table(table))
    if loaded is not None:
        log.info("tabulated %d couples", len(loaded.records))


def sorting_report(table, scheme: WeightingScheme) -> dict:
    sm = interest_factors(table)
    return {
        "command": "sorting",
        "labels": list(table.schema.labels),
        "n_couples": table.n_couples,
        "cells": table.cells,
        "interest_factors": sm.values,
        "diagonal_pam": diagonal_pam(sm),
        "scheme": str(scheme),
        "overall_pam": overall_pam(table, scheme),
        "overall_pam_by_scheme": _pam_by_scheme(table, scheme),
    }


def cmd_sorting(args):
    table, _ = _table_from(args)
    _emit_json(args, sorting_report(table, args.weights))


def cmd_standardize(args):
    source = load_table(resolve_input(args.source))
    target = load_table(resolve_input(args.target_of))
    problem, result = _standardize(source, target, args.method, args.objective, args.tol, args.jitter)
    report = {
        "command": "standardize",
        "labels": list(source.schema.labels),
        "table": result.table.cells,
        "diagnostics": result.diagnostics(),
    }
    if args.method == "qp":
        cert = kkt_certificate(problem, args.objective, result.table)
        report["diagnostics"]["kkt_stationarity"] = cert.stationarity
        report["diagnostics"]["kkt_min_bound_multiplier"] = cert.min_bound_multiplier
    if args.table_out:
        Path(args.table_out).write_text(format_table(result.table))
    _emit_json(args, report)


def cmd_gini(args):
    loaded = _couples(args, args.couples)
    joint = household_distribution(loaded.records, _schema(args), args.deciles)
    g = gini(joint)
    _emit_json(
        args,
        {
            "command": "gini",
            "n": args.deciles,
            "n_couples": len(loaded.records),
            "rejects": dict(loaded.rejects),
            "gini": g.gini,
            "lorenz_F": g.F,
            "lorenz_Y": g.Y,
        },
    )


def simulate(couples, schema, mode, n=10, t1_table=None, objective=DEFAULT_OBJECTIVE, zero_cell_policy="error") -> dict:
    """Observed versus counterfactual Gini for one couples sample."""
    joint = household_distribution(couples, schema, n)
    table = joint.type_table()
    warnings = []
    reference = None
    if mode.startswith("fixed"):
        if t1_table is None:
            raise EduSortError("fixed-sorting needs --t1-table")
        if t1_table.schema.labels != schema.labels:
            raise EduSortError("t1 table labels do not match the schema")
        gap = max(
            np.abs(t1_table.row_marginal - table.row_marginal).max(),
            np.abs(t1_table.col_marginal - table.col_marginal).max(),
        )
        reference = t1_table
        if gap > 1e-9:
            problem = StandardizationProblem.to_marginals_of(t1_table, table)
            reference = standardize_qp(problem, objective).table
            warnings.append(f"t1 table standardized to the observed marginals ({objective.kind} QP)")
    spec = CounterfactualSpec(mode, reference, zero_cell_policy)
    cf = run(spec, joint, table)
    warnings.extend(cf.warnings)
    observed = gini(joint).gini
    counter = counterfactual_gini(cf).gini
    return {
        "command": "counterfactual",
        "mode": spec.mode,
        "n": n,
        "observed_gini": observed,
        "counterfactual_gini": counter,
        "pct_change": (counter - observed) / observed if observed else 0.0,
        "scaling_factors": cf.scaling_factors,
        "warnings": warnings,
    }


def cmd_counterfactual(args):
    loaded = _couples(args, args.couples)
    t1 = load_table(resolve_input(args.t1_table)) if args.t1_table else None
    report = simulate(
        loaded.records, _schema(args), args.mode, args.deciles, t1, args.objective, args.zero_cells
    )
    report["n_couples"] = len(loaded.records)
    _emit_json(args, report)


def trend_report(t1, t2, direction, scheme, method="qp", objective=DEFAULT_OBJECTIVE, tol=MARGINAL_TOL, country=None):
    if direction == "standardize-t1":
        problem, result = _standardize(t1, t2, method, objective, tol)
        table_t1, table_t2 = result.table, t2
    else:
        problem, result = _standardize(t2, t1, method, objective, tol)
        table_t1, table_t2 = t1, result.table
    pam = {}
    for s in (WIFE, HUSBAND, AVERAGE, scheme):
        pam[str(s)] = pam_trend(table_t1, table_t2, s).as_dict()
    return {
        "command": "trend",
        "country": country,
        "labels": list(t1.schema.labels),
        "direction": direction,
        "scheme": str(scheme),
        "pam": pam,
        "pct_change": pam[str(scheme)]["pct_change"],
        "diagonal_pam": {
            "t1": diagonal_pam(interest_factors(table_t1)),
            "t2": diagonal_pam(interest_factors(table_t2)),
        },
        "standardized_table": result.table.cells,
        "standardization": result.diagnostics(),
    }


def _trend_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["country", "direction", "period", "measure", "group", "value"])
    country = report["country"] or ""
    for scheme, vals in report["pam"].items():
        for period in ("t1", "t2"):
            w.writerow([country, report["direction"], period, f"overall_pam_{scheme}", "", repr(vals[f"pam_{period}"])])
    for period in ("t1", "t2"):
        for label, v in zip(report["labels"], report["diagonal_pam"][period]):
            w.writerow([country, report["direction"], period, "group_pam", label, repr(float(v))])
    return buf.getvalue()


def cmd_trend(args):
    t1 = load_table(resolve_input(args.t1))
    loaded = None
    if args.couples:
        loaded = _couples(args, args.couples)
        t2 = build_table(loaded.records, _schema(args))
    elif args.t2:
        t2 = load_table(resolve_input(args.t2))
    else:
        raise EduSortError("give --t2 or --couples")
    report = trend_report(t1, t2, args.direction, args.weights, args.method, args.objective, args.tol, args.country)
    if loaded is not None:
        report["counterfactual"] = {
            mode: simulate(loaded.records, _schema(args), mode, args.deciles, t1, args.objective)
            for mode in ("random", "fixed")
        }
    if args.csv_out:
        Path(args.csv_out).write_text(_trend_csv(jsonable(report)))
    _emit_json(args, report)


def cmd_synth(args):
    table = load_table(resolve_input(args.table))
    k = len(table.schema)
    model = IncomeModel.education_premium(
        k, base=args.base_income, step=args.premium, dispersion=args.dispersion, correlation=args.correlation
    )
    spec = SynthSpec(table, model, args.n, seed=args.seed, child_rate=args.child_rate)
    couples = generate_synthetic(spec)
    if args.schema_out:
        Path(args.schema_out).write_text("".join(f"{label}\n" for label in table.schema.labels))
    _emit(args, format_couples(couples))


def cmd_calibrate(args):
    report = calibrate()
    report["command"] = "calibrate"
    _emit_json(args, report)


# ------------------------------------------------------------------- parser


def _weights(text):
    try:
        return WeightingScheme.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _objective(text):
    try:
        return ObjectiveVariant(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--schema", help="education schema file, one label per line (lowest first)")
    g.add_argument("--weights", type=_weights, default=WIFE, help="wife|husband|average|convex=LAMBDA (default wife)")
    g.add_argument("--deciles", type=int, default=10, help="number of income bands (default 10)")
    g.add_argument("--seed", type=int, default=0, help="seed for synthetic runs")
    g.add_argument("--out", help="write the report here instead of stdout")
    g.add_argument("-v", "--verbose", action="store_true")

    filt = argparse.ArgumentParser(add_help=False)
    f = filt.add_argument_group("sample filter")
    f.add_argument("--min-age", type=float, default=25)
    f.add_argument("--max-age", type=float, default=55)
    f.add_argument("--allow-missing-income", action="store_true", help="treat a missing income as zero")
    f.add_argument("--first-marriage-only", action="store_true")

    solver = argparse.ArgumentParser(add_help=False)
    s = solver.add_argument_group("standardization")
    s.add_argument("--method", choices=("qp", "ipf"), default="qp")
    s.add_argument("--objective", type=_objective, default=DEFAULT_OBJECTIVE, help="uniform|invprod")
    s.add_argument("--tol", type=float, default=MARGINAL_TOL)

    parser = argparse.ArgumentParser(prog="edusort", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("table", parents=[common, filt], help="build a contingency table from couples")
    p.add_argument("--couples", required=True)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("sorting", parents=[common, filt], help="interest factors and PAM measures")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table")
    src.add_argument("--couples")
    p.set_defaults(func=cmd_sorting)

    p = sub.add_parser("standardize", parents=[common, solver], help="move a table to another table's marginals")
    p.add_argument("--source", required=True)
    p.add_argument("--target-of", required=True)
    p.add_argument("--jitter", type=float, default=0.0, help="IPF only: fill empty cells with this mass")
    p.add_argument("--table-out", help="also write the standardized table as CSV")
    p.set_defaults(func=cmd_standardize)

    p = sub.add_parser("gini", parents=[common, filt], help="decile Gini of equivalized household income")
    p.add_argument("--couples", required=True)
    p.set_defaults(func=cmd_gini)

    p = sub.add_parser(
        "counterfactual", aliases=["simulate"], parents=[common, filt], help="observed vs counterfactual Gini"
    )
    p.add_argument("--mode", choices=("random", "fixed"), required=True)
    p.add_argument("--couples", required=True)
    p.add_argument("--t1-table")
    p.add_argument("--objective", type=_objective, default=DEFAULT_OBJECTIVE, help="QP objective if the t1 table needs standardizing")
    p.add_argument("--zero-cells", choices=("error", "drop-and-renormalize"), default="error")
    p.set_defaults(func=cmd_counterfactual)

    p = sub.add_parser("trend", parents=[common, filt, solver], help="PAM trend with standardized marginals")
    p.add_argument("--t1", required=True)
    p.add_argument("--t2")
    p.add_argument("--couples", help="period-2 couples; adds counterfactual Gini results")
    p.add_argument("--direction", choices=("standardize-t1", "standardize-t2"), default="standardize-t1")
    p.add_argument("--country")
    p.add_argument("--csv-out", help="long-format plot data")
    p.set_defaults(func=cmd_trend)

    p = sub.add_parser("synth", parents=[common], help="synthetic couples drawn from a table")
    p.add_argument("--table", required=True)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--base-income", type=float, default=1000.0)
    p.add_argument("--premium", type=float, default=1.8, help="income ratio between adjacent education levels")
    p.add_argument("--dispersion", type=float, default=0.6)
    p.add_argument("--correlation", type=float, default=0.3)
    p.add_argument("--child-rate", type=float, default=1.0)
    p.add_argument("--schema-out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate", parents=[common], help="QP objective calibration against published tables")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except NotConverged as exc:
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    except ZeroCellError as exc:
        log.error("%s", exc)
        return EXIT_ZERO_CELL
    except (EduSortError, ValueError, FileNotFoundError) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
