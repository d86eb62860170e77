"""``excli``: run an experiment from a JSON config and emit CSV or JSON.

Exit codes: 0 success, 2 validation error, 3 numerical failure in a replica
(unless ``--keep-going``).
"""

import argparse
import json
import sys

from ..errors import NumericalError, ValidationError
from .config import EXPERIMENTS, ExperimentConfig, load_config
from .emit import emit
from .runner import run_experiment

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="excli", description="Run seeded risk experiments.")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--seed", type=int, help="root seed (unsigned 64-bit)")
        s.add_argument("--reps", type=int, help="replicas per grid point")
        s.add_argument("--threads", type=int, help="worker threads")
        s.add_argument("--out", help="output path (default: stdout)")
        s.add_argument("--format", choices=("csv", "json"), default="csv")
        s.add_argument("--keep-going", action="store_true", help="exit 0 even if replicas failed")
        s.add_argument("--set", action="append", default=[], metavar="KEY=JSON",
                       help="override one parameter, e.g. --set d=30 --set 'ns=[50,100]'")
    return p


def build_config(args):
    raw = load_config(args.config).to_dict() if args.config else {"experiment": args.experiment, "params": {}}
    if raw["experiment"] != args.experiment:
        raise ValidationError(f"field 'experiment': config is for {raw['experiment']!r}, "
                              f"subcommand is {args.experiment!r}")
    params = dict(raw.get("params", {}))
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValidationError(f"--set expects KEY=JSON, got {item!r}")
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            params[key] = val
    if args.reps is not None:
        params["reps"] = args.reps
    raw["params"] = params
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.threads is not None:
        raw["threads"] = args.threads
    return ExperimentConfig.from_dict(raw)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        config = build_config(args)
        table = run_experiment(config)
    except ValidationError as exc:
        print(f"excli: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"excli: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    data = emit(table, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    if table.failed and not args.keep_going:
        print("excli: numerical failure in at least one replica (rows flagged)", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK
