"""Command line entry point: validate, run, sweep, fit, report, show."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict

from ..core_model import derive_exponents, validate_params
from ..scattering_lab import decay_fit
from .config import ConfigError, load_config, parse_config
from .experiments import REGISTRY, named
from .runner import (
    EXIT_INVALID,
    emit_plot_csv,
    exit_code,
    model_params,
    read_records,
    run_experiment,
    summary_table,
    sweep,
)


def _config(source):
    if os.path.exists(source):
        return load_config(source)
    if source in REGISTRY:
        return named(source)
    raise ConfigError(f"no config file or named experiment {source!r}")


def _axis(text):
    key, _, values = text.partition("=")
    if not values:
        raise argparse.ArgumentTypeError("axis must look like section.key=v1,v2,...")
    return key.strip(), [v.strip() for v in values.split(",")]


def cmd_validate(args):
    cfg = _config(args.config)
    params = model_params(cfg)
    report = validate_params(params)
    out = {"ok": report.ok, "violated": list(report.violated), "checked": list(report.checked)}
    if report.ok:
        out["derived"] = {k: (str(v) if not isinstance(v, float) else v)
                          for k, v in asdict(derive_exponents(params)).items()}
    print(json.dumps(out, indent=2))
    return 0 if report.ok else EXIT_INVALID


def cmd_run(args):
    record = run_experiment(_config(args.config), base_dir=args.base_dir)
    print(summary_table([record]))
    if "error" in record:
        print(record["error"], file=sys.stderr)
    return exit_code(record)


def cmd_sweep(args):
    records = sweep(_config(args.config), args.axis or [], workers=args.workers,
                    base_dir=args.base_dir)
    print(summary_table(records))
    return max((exit_code(r) for r in records), default=0)


def cmd_fit(args):
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    series = [(float(r["t"]), float(r[args.column])) for r in rows]
    window = tuple(args.window) if args.window else None
    print(json.dumps(asdict(decay_fit(series, window)), indent=2))
    return 0


def cmd_report(args):
    records = read_records(args.records)
    if args.plot:
        quantity, path = args.plot
        emit_plot_csv(records, quantity, path)
    print(summary_table(records))
    return 0


def cmd_show(args):
    print(REGISTRY[args.name], end="")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="inls-lab")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("validate", help="check model parameters of a config")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("config", help="config file or registered name")
    p.add_argument("--base-dir", default=None)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run the Cartesian product of axis values")
    p.add_argument("config")
    p.add_argument("--axis", type=_axis, action="append", help="section.key=v1,v2,...")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--base-dir", default=None)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("fit", help="log-log decay fit of a series CSV column")
    p.add_argument("csv")
    p.add_argument("--column", default="err_corrected")
    p.add_argument("--window", type=float, nargs=2, default=None)
    p.set_defaults(func=cmd_fit)
    p = sub.add_parser("report", help="summarize a record file")
    p.add_argument("records")
    p.add_argument("--plot", nargs=2, metavar=("QUANTITY", "PATH"))
    p.set_defaults(func=cmd_report)
    p = sub.add_parser("show", help="print a registered config")
    p.add_argument("name", choices=sorted(REGISTRY))
    p.set_defaults(func=cmd_show)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
