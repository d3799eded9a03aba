"""Command line entry point: ``optinit run | report | oracle-check``."""

import argparse
import logging
import sys
from pathlib import Path

from . import oracle
from .harness import (
    ExperimentSpec,
    aggregate_and_emit,
    read_records,
    run_experiment,
    write_records,
)

OVERRIDABLE = ("n_runs", "episodes", "window", "base_seed", "output_dir")


def _cmd_run(args):
    spec = ExperimentSpec.load(args.config)
    for key in OVERRIDABLE:
        value = getattr(args, key)
        if value is not None:
            setattr(spec, key, value)
    spec.validate()
    records = run_experiment(spec, workers=args.workers)
    out = Path(spec.output_dir)
    write_records(records, spec, out)
    for path in aggregate_and_emit(records, spec, out, plots=not args.no_plots):
        print(path)
    return 0


def _cmd_report(args):
    records, spec = read_records(args.records_dir)
    out = Path(args.output_dir or args.records_dir)
    for path in aggregate_and_emit(records, spec, out, plots=not args.no_plots):
        print(path)
    return 0


def _cmd_oracle_check(args):
    results = oracle.run_all()
    for result in results:
        print(result.line())
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="optinit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config file")
    run.add_argument("config", type=Path)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--n-runs", dest="n_runs", type=int)
    run.add_argument("--episodes", type=int)
    run.add_argument("--window", type=int)
    run.add_argument("--base-seed", dest="base_seed", type=int)
    run.add_argument("--output-dir", dest="output_dir")
    run.add_argument("--no-plots", action="store_true")
    run.set_defaults(func=_cmd_run)

    report = sub.add_parser("report", help="re-aggregate a records directory")
    report.add_argument("records_dir", type=Path)
    report.add_argument("--output-dir")
    report.add_argument("--no-plots", action="store_true")
    report.set_defaults(func=_cmd_report)

    check = sub.add_parser("oracle-check", help="verify the value-shift identities")
    check.set_defaults(func=_cmd_oracle_check)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
