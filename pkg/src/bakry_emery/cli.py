"""Command-line batch runner: ``bakry-emery run scenario.json``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .scenario import ScenarioError, builtin_catalog, load_scenario, run_checks, to_jsonable

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])


def _headline(result) -> str:
    p = result.payload
    for key in ("max_residual", "residual", "min_value", "first_parameter", "max_field_error", "limit_estimate",
                "lhs", "sign_check", "geodesic", "jacobi", "full", "timelike_residual", "ric_f_1", "verdict"):
        if key in p:
            v = p[key]
            if isinstance(v, dict):
                v = v.get("first_parameter")
            return f"{key}={v:.6g}" if isinstance(v, float) else f"{key}={v}"
    if "detection" in p:
        return f"first_parameter={p['detection'].get('first_parameter')}"
    return ""


def write_outputs(report, outdir: str) -> None:
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(report.to_dict()), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    for r in report.results:
        for hname, (header, rows) in sorted(r.histories.items()):
            _write_csv(os.path.join(outdir, f"{r.name}_{hname}.csv"), header, rows)
    lines = [f"scenario: {report.scenario}", f"seed: {report.seed}", ""]
    lines.append(f"{'#':>3}  {'check':<32} {'type':<22} {'status':<9} {'time[s]':>8}  headline")
    for i, r in enumerate(report.results):
        lines.append(f"{i:>3}  {r.name[:32]:<32} {r.type:<22} {r.status:<9} {r.wall_time:>8.3f}  {_headline(r)}")
        if r.status in ("error", "fail") and r.message:
            lines.append(f"{'':>5}{r.message}")
    counts = report.to_dict()["counts"]
    lines += ["", "  ".join(f"{k}: {v}" for k, v in counts.items()), f"exit code: {report.exit_code}"]
    with open(os.path.join(outdir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bakry-emery", description="Run Bakry-Emery geometry scenario checks.")
    ap.add_argument("--list-builtins", action="store_true", help="list builtin spacetimes and their parameters")
    sub = ap.add_subparsers(dest="command")
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("file")
    run.add_argument("--output", help="output directory (default: scenario 'output' field or ./out/<name>)")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--tol-scale", type=float, default=1.0, help="multiply all tolerances")
    run.add_argument("--validate-only", action="store_true", help="parse and validate, then exit")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.list_builtins:
        for name, params in builtin_catalog().items():
            ps = ", ".join(f"{k}={v!r}" for k, v in params.items())
            print(f"{name}({ps})")
        if args.command is None:
            return EXIT_OK
    if args.command != "run":
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        scenario = load_scenario(args.file, seed=args.seed, tol_scale=args.tol_scale)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.validate_only:
        print(f"{args.file}: ok ({len(scenario.checks)} checks)")
        return EXIT_OK
    report = run_checks(scenario)
    outdir = args.output or scenario.output or os.path.join("out", scenario.name)
    write_outputs(report, outdir)
    for i, r in enumerate(report.results):
        print(f"{r.status.upper():<8} {r.name}  {_headline(r)}")
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
