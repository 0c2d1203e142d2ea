# stdlib imports
import argparse
import sys
from pathlib import Path
from typing import List, Optional

# external imports
from loguru import logger

# internal imports
from src.cli.commands import EXIT_CONFIG, cmd_audit, cmd_bench, cmd_train


def parse_int_list(text: str) -> List[int]:
    """``"1,2,4"`` → [1, 2, 4]; ``"2..5"`` → [2, 3, 4, 5] (inclusive)."""
    try:
        if ".." in text:
            low, high = (int(v) for v in text.split(".."))
            values = list(range(low, high + 1))
        else:
            values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse {text!r} as a list of integers")
    if not values:
        raise argparse.ArgumentTypeError(f"{text!r} is an empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shapley-credit",
        description="Shapley counterfactual credit assignment for cooperative multi-agent learning",
    )
    parser.add_argument("--log-level", default="INFO", help="loguru level for stderr output")
    parser.add_argument("--quiet", action="store_true", help="hide progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a preset or config file")
    train.add_argument("config", type=Path)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--out", type=Path, default=None, help="run directory (overrides [run] out_dir)")
    train.add_argument("--overwrite", action="store_true", help="replace an existing run directory")

    audit = sub.add_parser("audit", help="compare credit strategies on a trained checkpoint")
    audit.add_argument("checkpoint", type=Path)
    audit.add_argument("config", type=Path)
    audit.add_argument("--steps", type=int, default=100)
    audit.add_argument("--M", dest="samples", type=parse_int_list, default=[1, 2, 4, 5, 8])
    audit.add_argument("--out", type=Path, default=None)
    audit.add_argument("--seed", type=int, default=None)

    bench = sub.add_parser("bench", help="exact versus Monte Carlo credit cost")
    bench.add_argument("--n", dest="agents", type=parse_int_list, default=list(range(2, 11)))
    bench.add_argument("--M", dest="samples", type=parse_int_list, default=[1, 5, 10])
    bench.add_argument("--out", type=Path, default=Path("bench"))
    bench.add_argument("--seed", type=int, default=0)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.remove()
    try:
        logger.add(sys.stderr, level=args.log_level.upper())
    except ValueError:
        logger.add(sys.stderr, level="INFO")
        logger.error(f"unknown log level {args.log_level!r}")
        return EXIT_CONFIG

    if args.command == "train":
        return cmd_train(args.config, args.seed, args.out, args.overwrite, progress=not args.quiet)
    if args.command == "audit":
        return cmd_audit(args.checkpoint, args.config, args.steps, args.samples, args.out, args.seed)
    return cmd_bench(args.agents, args.samples, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
