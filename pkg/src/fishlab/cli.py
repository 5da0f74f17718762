"""Command line entry point.

    fishlab run <config> [--jobs N] [--verbose]
    fishlab report <results.csv>
    fishlab gen <config> --out <file> [--z Z] [--seed S]

Exit codes: 0 ok, 1 runtime failure, 2 bad config / input.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, FishlabError, ParseError
from .experiment import emit_report, load_config, read_results, run_experiment
from .workload import generate_zipf_evolving, write_tuple_file

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

log = logging.getLogger("fishlab")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    # SUPPRESS so a flag given before the subcommand is not reset by the subparser
    p.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="parallel scenarios (default 1)")
    p.add_argument("--verbose", action="store_true", default=argparse.SUPPRESS, help="log progress to stderr")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="fishlab", description="Stream grouping simulator.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run an experiment matrix")
    p_run.add_argument("config")

    p_rep = sub.add_parser("report", parents=[common], help="print comparison tables for a results CSV")
    p_rep.add_argument("csv")

    p_gen = sub.add_parser("gen", parents=[common], help="write the configured workload as a tuple file")
    p_gen.add_argument("config")
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--z", type=float, default=None, help="skew (default: first in [matrix] skews)")
    p_gen.add_argument("--seed", type=int, default=None, help="seed (default: first in [matrix] seeds)")
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    try:
        rows = run_experiment(cfg, jobs=getattr(args, "jobs", 1))
    except FishlabError as exc:
        print(f"fishlab: scenario failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    log.info("wrote %d rows to %s", len(rows), cfg.csv_path)
    print(cfg.csv_path)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    rows = read_results(args.csv)
    sys.stdout.write(emit_report(rows))
    return EXIT_OK


def _cmd_gen(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    if cfg.from_file:
        raise ConfigError("source", "gen needs a zipf workload, not a tuple file")
    z = args.z if args.z is not None else cfg.skews[0]
    seed = args.seed if args.seed is not None else cfg.seeds[0]
    n = write_tuple_file(args.out, generate_zipf_evolving(cfg.workload(z, seed)))
    log.info("wrote %d tuples to %s", n, args.out)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handlers = {"run": _cmd_run, "report": _cmd_report, "gen": _cmd_gen}
    try:
        return handlers[args.command](args)
    except (ConfigError, ParseError) as exc:
        print(f"fishlab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FishlabError, OSError) as exc:
        print(f"fishlab: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
