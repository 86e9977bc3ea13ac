"""Command-line interface: run experiments, rebuild reports, export curves."""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import ConfigError, DatasetSpec, load_config, validate
from .harness import build_report, emit_convergence, format_report, load_runs, run_experiment

_OUT_ROOT_ENV = "SFEKIT_OUT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfekit",
        description="Feature-selection benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment's run matrix")
    run_p.add_argument("--config", required=True, help="experiment INI file")
    run_p.add_argument("--algo", action="append", metavar="NAME",
                       help="run only these algorithms (repeatable, comma-splittable)")
    run_p.add_argument("--dataset", action="append", metavar="NAME_OR_CSV",
                       help="configured dataset name, or a CSV path for an ad-hoc run")
    run_p.add_argument("--runs", type=int, help="repeats per (algorithm, dataset)")
    run_p.add_argument("--budget", type=int, help="fitness evaluations per run")
    run_p.add_argument("--seed", type=int, help="master seed of the run matrix")
    run_p.add_argument("--workers", type=int, help="parallel worker processes")
    run_p.add_argument("--label-col", help="label column for ad-hoc CSV datasets")
    run_p.add_argument("--header", action="store_true",
                       help="ad-hoc CSV datasets have a header row")
    run_p.add_argument("--fixed-folds", action="store_true", default=None,
                       help="one CV split per dataset instead of per run")
    run_p.add_argument("--fold-mean", action="store_true", default=None,
                       help="score masks by the mean of per-fold accuracies")
    run_p.add_argument("--out", help=f"output directory (default: ${_OUT_ROOT_ENV} "
                                     "or ./sfekit-runs, plus the config name)")
    run_p.add_argument("--force", action="store_true",
                       help="write into a non-empty output directory")

    rep_p = sub.add_parser("report", help="rebuild the report from persisted runs")
    rep_p.add_argument("experiment_dir")

    conv_p = sub.add_parser("converge", help="export mean convergence curves as CSV")
    conv_p.add_argument("experiment_dir")
    conv_p.add_argument("--out", required=True, help="directory for the CSV files")
    return parser


def _split_multi(values):
    out = []
    for v in values:
        out.extend(p.strip() for p in v.split(",") if p.strip())
    return out


def _apply_overrides(cfg, args):
    updates = {}
    if args.algo:
        updates["algorithms"] = tuple(_split_multi(args.algo))
    if args.dataset:
        label_col = args.label_col if args.label_col is not None else "-1"
        try:
            label_col = int(label_col)
        except ValueError:
            pass
        by_name = {spec.name: spec for spec in cfg.datasets}
        chosen = []
        for entry in _split_multi(args.dataset):
            if entry in by_name:
                chosen.append(by_name[entry])
            elif os.path.isfile(entry):
                name = os.path.splitext(os.path.basename(entry))[0]
                chosen.append(DatasetSpec(
                    name=name,
                    path=os.path.abspath(entry),
                    label_col=label_col,
                    has_header=args.header,
                ))
            else:
                raise ConfigError(
                    f"--dataset {entry!r} is neither a configured name nor a CSV file"
                )
        updates["datasets"] = tuple(chosen)
    for key in ("runs", "budget", "seed", "workers"):
        value = getattr(args, key)
        if value is not None:
            updates[key] = value
    if args.fixed_folds is not None:
        updates["fixed_folds"] = args.fixed_folds
    if args.fold_mean is not None:
        updates["fold_mean"] = args.fold_mean
    if args.out:
        updates["out"] = args.out
    if not updates:
        return cfg
    cfg = dataclasses.replace(cfg, **updates)
    validate(cfg)
    return cfg


def _default_out_dir(config_path: str) -> str:
    root = os.environ.get(_OUT_ROOT_ENV, "sfekit-runs")
    stem = os.path.splitext(os.path.basename(config_path))[0]
    return os.path.join(root, stem)


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    out_dir = cfg.out or _default_out_dir(args.config)
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not args.force:
        print(f"error: output directory {out_dir} is not empty (use --force)",
              file=sys.stderr)
        return 2
    report = run_experiment(cfg, out_dir)
    print(format_report(report), end="")
    print(f"\nwrote {out_dir}/report.json, report.txt and raw runs")
    if report.failures:
        return 1
    return 0


def _cmd_report(args) -> int:
    cfg = load_config(os.path.join(args.experiment_dir, "config.ini"),
                      check_files=False)
    results = load_runs(args.experiment_dir)
    report = build_report(cfg, results)
    print(format_report(report), end="")
    return 0


def _cmd_converge(args) -> int:
    written = emit_convergence(args.experiment_dir, args.out)
    if not written:
        print("no successful runs with traces found", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "converge":
            return _cmd_converge(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
