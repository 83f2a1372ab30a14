"""Command-line entry point: ``randimpute <subcommand> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .core import ThetaVector, ValidationError
from .dataio import DataError, ingest_csv, write_completed
from .harness import METHODS, ConfigError, SimConfig, analyze_dataset, emit_report, impute_with, run_simulation
from .identify import IdentificationError, Restriction, build_identified_joint, check_identification
from .impute import GibbsConfig
from .rngkit import derive_stream

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randimpute", description="Identified multiple imputation for randomized experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a Monte Carlo study from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides output_dir in the config)")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.add_argument("--workers", type=int, help="override the worker count")
    s.add_argument("--quiet", action="store_true")

    def data_args(q):
        q.add_argument("--data", required=True)
        q.add_argument("--method", required=True, choices=[m for m in METHODS if m != "BeforeDeletion"])
        q.add_argument("--restriction", choices=("icin", "mar"), default="icin")
        q.add_argument("--m", type=int, default=100)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--burnin", type=int, default=500)
        q.add_argument("--thin", type=int, default=50)
        q.add_argument("--recode-missing", action="append", default=[], metavar="TOKEN",
                       help="treat TOKEN as a missing covariate value (repeatable)")

    a = sub.add_parser("analyze", help="ITT analysis of one CSV dataset")
    data_args(a)
    a.add_argument("--json", action="store_true", help="print JSON instead of key = value lines")

    i = sub.add_parser("impute", help="write completed copies of one CSV dataset")
    data_args(i)
    i.add_argument("--out", required=True)

    c = sub.add_parser("check-identify", help="identification diagnostics for a 9-probability vector")
    c.add_argument("--theta", required=True, help="JSON list, JSON object with 'theta', or whitespace/comma separated numbers")
    c.add_argument("--restriction", choices=("icin", "mar", "both"), default="both")
    return p


def _read_theta(path) -> ThetaVector:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
        if isinstance(raw, dict):
            raw = raw["theta"]
    except json.JSONDecodeError:
        raw = text.replace(",", " ").split()
    try:
        vals = np.array([float(v) for v in raw])
    except (TypeError, ValueError, KeyError) as exc:
        raise DataError(f"cannot parse theta: {exc}") from None
    return ThetaVector(vals)


def _gibbs(args) -> GibbsConfig:
    try:
        return GibbsConfig(burnin=args.burnin, thin=args.thin, m=args.m)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def cmd_simulate(args) -> int:
    cfg = SimConfig.from_json(args.config)
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    out = args.out or cfg.output_dir or "."

    def progress(i, total):
        if not args.quiet and (i == total or i % max(1, total // 20) == 0):
            print(f"replication {i}/{total}", file=sys.stderr)

    report = run_simulation(cfg, progress)
    paths = emit_report(report, args.format, out)
    if not args.quiet:
        for r in report.rows:
            print(f"{r.method:15s} {r.coefficient:5s} bias={r.abs_bias:.3f} mc_sd={r.mc_sd:.3f} "
                  f"se={r.se:.3f} cov={r.coverage:.3f} len={r.avg_ci_length:.3f} used={r.n_used} failed={r.n_failed}")
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    data = ingest_csv(args.data, args.recode_missing)
    res = analyze_dataset(data, args.method, args.restriction, args.m, args.seed, _gibbs(args))
    if args.json:
        print(json.dumps(res.__dict__))
    else:
        print(res.to_text())
    return EXIT_OK


def cmd_impute(args) -> int:
    data = ingest_csv(args.data, args.recode_missing)
    stream = derive_stream(args.seed, 0).child(args.method)
    sets = impute_with(args.method, data, args.restriction, args.m, stream, _gibbs(args))
    for p in write_completed(sets, args.out, args.method):
        print(p)
    return EXIT_OK


def cmd_check_identify(args) -> int:
    theta = _read_theta(args.theta)
    restrictions = ("icin", "mar") if args.restriction == "both" else (args.restriction,)
    ok = True
    for r in restrictions:
        report = check_identification(build_identified_joint(theta, Restriction.parse(r)))
        print(report.to_text())
        print()
        ok &= report.passed()
    return EXIT_OK if ok else EXIT_RUNTIME


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "impute": cmd_impute,
    "check-identify": cmd_check_identify,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, ValidationError, IdentificationError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
