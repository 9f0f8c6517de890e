"""Command-line front end: run trials, validate specs, rebuild comparisons.

Verbs:
    run <spec>       execute the configured trials, write CSV/JSON/figures
    validate <spec>  report every configuration violation
    compare <outdir> recompute the comparison table from stored summaries
    init             print a canonical spec document to stdout

Exit codes: 0 success, 1 configuration error, 2 trial divergence, 3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .config import (
    RunSpec,
    comparison_spec_dict,
    default_spec_dict,
    load_spec,
    parse_controller_token,
    validate_spec_file,
)
from .errors import ConfigError, TrialDiverged
from .simworld import TrialResult, run_trial

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_IO = 3

CSV_COLUMNS = (
    ["t"]
    + [f"e{i}" for i in range(1, 5)]
    + [f"u_cmd{i}" for i in range(1, 5)]
    + [f"u_applied{i}" for i in range(1, 5)]
    + ["meas_valid", "qp_status"]
    + [f"kf_x{i}" for i in range(1, 5)]
)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_timeseries_csv(result: TrialResult, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for k in range(result.t.size):
            row = (
                [_fmt(result.t[k])]
                + [_fmt(v) for v in result.e[k]]
                + [_fmt(v) for v in result.u_cmd[k]]
                + [_fmt(v) for v in result.u_applied[k]]
                + [int(result.meas_valid[k]), result.qp_status[k]]
                + [_fmt(v) for v in result.kf_x[k]]
            )
            writer.writerow(row)


def trial_summary(result: TrialResult) -> dict:
    summary = {"seed": int(result.seed)}
    summary.update(result.metrics.as_dict())
    return summary


def mean_summary(trials: list[dict]) -> dict:
    keys = ("convergence_time", "rmse_error", "rmse_joint", "constraint_violations")
    out = {key: float(np.mean([t[key] for t in trials])) for key in keys}
    out["oscillation_std"] = [
        float(v) for v in np.mean([t["oscillation_std"] for t in trials], axis=0)
    ]
    return out


def write_summary_json(controller: str, trials: list[dict], path: str) -> None:
    doc = {
        "controller": controller,
        "trials": trials,
        "mean": mean_summary(trials),
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_comparison(rows: list[dict], outdir: str, figures: bool) -> None:
    path = os.path.join(outdir, "comparison.csv")
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["controller", "time_s", "rmse_error", "rmse_joint"])
        for row in rows:
            writer.writerow(
                [
                    row["controller"],
                    _fmt(row["time_s"]),
                    _fmt(row["rmse_error"]),
                    _fmt(row["rmse_joint"]),
                ]
            )
    if figures:
        from .plots import save_comparison_figure

        save_comparison_figure(rows, os.path.join(outdir, "comparison.png"))


def print_comparison(rows: list[dict]) -> None:
    print(f"{'controller':<12} {'time_s':>10} {'rmse_error':>12} {'rmse_joint':>12}")
    for row in rows:
        print(
            f"{row['controller']:<12} {row['time_s']:>10.4f} "
            f"{row['rmse_error']:>12.4f} {row['rmse_joint']:>12.4f}"
        )


def cmd_run(args) -> int:
    try:
        spec = load_spec(args.spec)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO

    run = spec.run
    if args.out is not None:
        run.output_dir = args.out
    if args.reps is not None:
        run.repetitions = args.reps
    if args.seed is not None:
        run.seed_base = args.seed
    if args.controllers is not None:
        run.controllers = [c.strip() for c in args.controllers.split(",") if c.strip()]
    if args.no_figures:
        run.emit_figures = False
    problems = run.validate()
    if problems:
        for violation in problems:
            print(f"config error: run.{violation}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        os.makedirs(run.output_dir, exist_ok=True)
        comparison_rows = []
        for token in run.controllers:
            kind, kf_override = parse_controller_token(token)
            ctrl_dir = os.path.join(run.output_dir, token)
            os.makedirs(ctrl_dir, exist_ok=True)
            summaries = []
            for rep in range(run.repetitions):
                scenario = replace(
                    spec.scenario,
                    controller=kind,
                    seed=run.seed_base + rep,
                )
                if kf_override is not None:
                    scenario.kf_enabled = kf_override
                try:
                    result = run_trial(scenario, mpc_cfg=spec.mpc, kf_cfg=spec.kalman)
                except TrialDiverged as exc:
                    print(f"trial diverged [{token} rep {rep}]: {exc}", file=sys.stderr)
                    return EXIT_DIVERGED
                if run.emit_timeseries:
                    write_timeseries_csv(
                        result, os.path.join(ctrl_dir, f"trial_{rep:02d}.csv")
                    )
                if run.emit_figures:
                    from .plots import save_trial_figure

                    save_trial_figure(
                        result, os.path.join(ctrl_dir, f"trial_{rep:02d}.png")
                    )
                summaries.append(trial_summary(result))
            if run.emit_summary:
                write_summary_json(
                    token, summaries, os.path.join(ctrl_dir, "summary.json")
                )
            mean = mean_summary(summaries)
            comparison_rows.append(
                {
                    "controller": token,
                    "time_s": mean["convergence_time"],
                    "rmse_error": mean["rmse_error"],
                    "rmse_joint": mean["rmse_joint"],
                }
            )
        if run.emit_comparison:
            write_comparison(comparison_rows, run.output_dir, run.emit_figures)
        print_comparison(comparison_rows)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        problems = validate_spec_file(args.spec)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    if problems:
        for violation in problems:
            print(f"violation: {violation}")
        print(f"{len(problems)} violation(s) found")
        return EXIT_CONFIG
    print("spec is valid")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        rows = []
        for entry in sorted(os.listdir(args.outdir)):
            summary_path = os.path.join(args.outdir, entry, "summary.json")
            if not os.path.isfile(summary_path):
                continue
            with open(summary_path, "r", encoding="utf-8") as handle:
                doc = json.load(handle)
            mean = doc["mean"]
            rows.append(
                {
                    "controller": doc["controller"],
                    "time_s": mean["convergence_time"],
                    "rmse_error": mean["rmse_error"],
                    "rmse_joint": mean["rmse_joint"],
                }
            )
        if not rows:
            print(f"no summaries found under {args.outdir}", file=sys.stderr)
            return EXIT_IO
        write_comparison(rows, args.outdir, figures=not args.no_figures)
        print_comparison(rows)
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_init(args) -> int:
    doc = comparison_spec_dict() if args.kind == "comparison" else default_spec_dict()
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ibvsim",
        description="Moment-feature visual servoing trials in a virtual camera loop",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the trials described by a spec file")
    p_run.add_argument("spec", help="path to the JSON run specification")
    p_run.add_argument("--out", help="output directory (overrides spec)")
    p_run.add_argument("--reps", type=int, help="repetitions per controller")
    p_run.add_argument("--seed", type=int, help="seed base (trial i uses seed+i)")
    p_run.add_argument(
        "--controllers",
        help="comma-separated controller list, e.g. ibvs,mpc,mpc1,mpc2 "
        "with optional +kf/-kf suffix",
    )
    p_run.add_argument("--no-figures", action="store_true", help="skip figure output")
    p_run.set_defaults(func=cmd_run)

    p_val = sub.add_parser("validate", help="check a spec file against all invariants")
    p_val.add_argument("spec", help="path to the JSON run specification")
    p_val.set_defaults(func=cmd_validate)

    p_cmp = sub.add_parser(
        "compare", help="rebuild the comparison table from stored summaries"
    )
    p_cmp.add_argument("outdir", help="directory produced by a previous run")
    p_cmp.add_argument("--no-figures", action="store_true", help="skip figure output")
    p_cmp.set_defaults(func=cmd_compare)

    p_init = sub.add_parser("init", help="print a canonical spec document")
    p_init.add_argument(
        "--kind",
        choices=("default", "comparison"),
        default="default",
        help="which canned spec to print",
    )
    p_init.set_defaults(func=cmd_init)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
