"""Command-line interface.

Subcommands: ``run <config.json>`` executes an experiment, ``accept`` runs
the acceptance suite, ``check-problem <instance.json>`` certifies a
serialized instance.  Exit codes: 0 success, 1 acceptance/certification
failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import acceptance
from . import problems as pb
from .harness import ConfigError, ExperimentConfig, run_experiment


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="blockprox",
        description="Stochastic mirror-prox solvers and rate benchmarks for "
        "Cartesian variational inequalities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment config (JSON)")
    p_run.add_argument("--out", default=None, help="output directory (default: config's)")
    p_run.add_argument("--seed", type=int, default=None, help="override the master seed")
    p_run.add_argument("--reps", type=int, default=None, help="override the replication count")
    p_run.add_argument("--quiet", action="store_true")

    p_acc = sub.add_parser("accept", help="run the acceptance suite")
    p_acc.add_argument("--out", default=None, help="write the JSON report here")
    p_acc.add_argument("--quiet", action="store_true")

    p_chk = sub.add_parser("check-problem", help="certify a serialized problem instance")
    p_chk.add_argument("instance", help="path to a problem JSON file")
    p_chk.add_argument("--samples", type=int, default=10_000)
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.add_argument("--quiet", action="store_true")
    return parser


def _cmd_run(args):
    try:
        config = ExperimentConfig.from_file(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.reps is not None:
            config.replications = args.reps
            config.validate()
        out_dir = args.out or config.out or Path(args.config).resolve().parent
        result = run_experiment(config, out_dir=out_dir, quiet=args.quiet)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if not args.quiet:
        print(f"wrote {result.csv_path} and {result.summary_path}")
    return 0


def _cmd_accept(args):
    report = acceptance.run_acceptance_suite(quiet=args.quiet)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    return 0 if report.passed else 1


def _cmd_check_problem(args):
    try:
        problem = pb.ScviProblem.from_json(Path(args.instance).read_text())
    except (FileNotFoundError, pb.ProblemError, KeyError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    mono = pb.certify_monotonicity(problem, n_samples=args.samples, seed=args.seed)
    consts = pb.certify_constants(problem, n_samples=args.samples, seed=args.seed)
    if not args.quiet:
        print(json.dumps({"monotonicity": mono.to_dict(), "constants": consts.to_dict()}, indent=2))
    if mono.passed and consts.passed:
        if not args.quiet:
            print(f"instance OK: {problem.monotonicity_class} certified on {args.samples} samples")
        return 0
    print("certification FAILED", file=sys.stderr)
    return 1


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "accept":
        return _cmd_accept(args)
    return _cmd_check_problem(args)


if __name__ == "__main__":
    sys.exit(main())
