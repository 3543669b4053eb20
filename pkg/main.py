"""
Quixer command-line entry point.

Subcommands:
    train       train a model from a run config (+ flag overrides)
    eval        score a checkpoint on a split, write postselection.csv
    verify      run the property suites (small | full)
    resources   fault-tolerant qubit and gate estimate for (q, n, l, d)
    aggregate   mean +/- std of best valid/test PPL and postselection over runs

Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric failure.

Usage:
    python main.py train --config configs/tiny.json
    python main.py eval --checkpoint runs/tiny/checkpoint.npz --split test
    python main.py verify --scale small
    python main.py resources -q 6 -n 32 -l 4 -d 3
    python main.py aggregate runs/seed0 runs/seed1 --output runs/aggregate.json
"""

import argparse
import logging
import sys
from typing import List, Optional

from app import __version__
from app.config import settings, is_config_valid
from app.config.run_config import add_run_config_flags, overrides_from_args
from app.commands import (
    EXIT_USAGE,
    cmd_aggregate,
    cmd_eval,
    cmd_resources,
    cmd_train,
    cmd_verify,
)


logger = logging.getLogger(__name__)


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with EXIT_USAGE instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def configure_logging(level: str) -> None:
    """Root logger on stderr; stdout is reserved for command output."""
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s - [%(levelname)s] - (%(name)s) - %(message)s",
        stream=sys.stderr,
    )


def build_parser() -> CliParser:
    parser = CliParser(
        prog="quixer",
        description="Quixer quantum transformer: simulator, trainer and resource estimator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CliParser)
    sub.required = True

    train = sub.add_parser("train", help="train a model")
    add_run_config_flags(train)

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint")
    evaluate.add_argument("--checkpoint", required=True, help="checkpoint .npz written by train")
    evaluate.add_argument("--split", choices=["train", "valid", "test"], default="valid")
    evaluate.add_argument("--vocab", default=None, help="vocabulary file (checked against the checkpoint)")
    add_run_config_flags(evaluate)

    verify = sub.add_parser("verify", help="run the property suites")
    verify.add_argument("--scale", choices=["small", "full"], default="small")
    verify.add_argument("--seed", type=int, default=0)

    resources = sub.add_parser("resources", help="fault-tolerant resource estimate")
    resources.add_argument("-q", type=int, required=True, help="system qubits")
    resources.add_argument("-n", type=int, required=True, help="tokens per context")
    resources.add_argument("-l", type=int, default=1, help="ansatz layers")
    resources.add_argument("-d", type=int, required=True, help="polynomial degree")
    resources.add_argument("--ancilla-select", action="store_true", help="ancilla-assisted select")
    resources.add_argument("--ancilla-multiplier", type=int, default=1,
                           help="gate multiplier of the ancilla-assisted select")
    resources.add_argument("--gates-per-token", type=int, default=None,
                           help="override the 4lq+1 token-unitary gate count")
    resources.add_argument("--prep-gates", type=int, default=None,
                           help="gate count of one state preparation")
    resources.add_argument("--seed", type=int, default=0,
                           help="accepted like every subcommand; the estimate is deterministic")

    aggregate = sub.add_parser("aggregate", help="aggregate several run directories")
    aggregate.add_argument("run_dirs", nargs="+", metavar="RUN_DIR", help="output directory of a train run")
    aggregate.add_argument("--output", default=None, help="also write the JSON report to this path")
    aggregate.add_argument("--seed", type=int, default=0,
                           help="accepted like every subcommand; aggregation is deterministic")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch and return the exit code."""
    if not is_config_valid():
        print("FATAL: QUIXER_* environment configuration is invalid.", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(settings.log_level)

    args = build_parser().parse_args(argv)
    logger.debug(f"[CLI] {args.command}: {vars(args)}")

    if args.command == "train":
        return cmd_train(args.config, overrides_from_args(args))
    if args.command == "eval":
        return cmd_eval(args.checkpoint, args.split, args.config, overrides_from_args(args), args.vocab)
    if args.command == "verify":
        return cmd_verify(args.scale, args.seed)
    if args.command == "aggregate":
        return cmd_aggregate(args.run_dirs, args.output)
    return cmd_resources(
        q=args.q,
        n=args.n,
        l=args.l,
        d=args.d,
        ancilla_select=args.ancilla_select,
        g_override=args.gates_per_token,
        prep_gates=args.prep_gates,
        ancilla_select_multiplier=args.ancilla_multiplier,
    )


if __name__ == "__main__":
    sys.exit(main())
