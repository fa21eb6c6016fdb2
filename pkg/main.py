#!/usr/bin/env python3
"""
loadrl - Pull-based, RL-supervised load balancing simulator.

Runs synthetic request workloads against a heterogeneous server farm,
either through classified load-balancer queues that server agents pull
from (with a credit-granting RL supervisor), or through one of the classic
push balancers, and writes event logs and reports for comparison.

Commands:
- run:      one scenario -> events.jsonl, report.json, report.csv
- compare:  policies x seeds -> compare.csv with per-policy means
- validate: check a scenario and print its normalized form
"""

import argparse
import logging
import sys
from typing import List, Optional

from cli.commands import EXIT_ERROR, compare_command, run_command, validate_command


def _seed_list(text: str) -> List[int]:
    """Parse "1,2,3" or "1-20" (inclusive) into seeds."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        try:
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid seed list: {text!r}") from None
    if not seeds or any(s < 0 for s in seeds):
        raise argparse.ArgumentTypeError(f"invalid seed list: {text!r}")
    return seeds


def _policy_list(text: str) -> List[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be >= 0")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadrl",
        description="Pull-based, RL-supervised load balancing simulator",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one scenario")
    run_p.add_argument("--scenario", required=True, help="scenario JSON file")
    run_p.add_argument("--seed", type=_non_negative, default=None, help="override the scenario seed")
    run_p.add_argument("--out", default=None, help="output directory (default: outputs.dir)")

    cmp_p = sub.add_parser("compare", help="compare policies over seeds")
    cmp_p.add_argument("--scenario", required=True, help="scenario JSON file")
    cmp_p.add_argument("--policies", required=True, type=_policy_list,
                       help="comma-separated: pull_rl, RR, WRR, LC, WLC, ADAPTIVE, WRT, IP_HASH, URL_HASH, RANDOM")
    cmp_p.add_argument("--seeds", required=True, type=_seed_list, help='e.g. "1,2,3" or "1-20"')
    cmp_p.add_argument("--out", default=None, help="output directory (default: outputs.dir)")
    cmp_p.add_argument("--jobs", type=int, default=1, help="parallel sub-runs")

    val_p = sub.add_parser("validate", help="validate a scenario and print it normalized")
    val_p.add_argument("--scenario", required=True, help="scenario JSON file")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s: %(message)s",
    )

    try:
        if args.command == "run":
            return run_command(args.scenario, args.seed, args.out)
        if args.command == "compare":
            return compare_command(args.scenario, args.policies, args.seeds, args.out, args.jobs)
        return validate_command(args.scenario)
    except Exception as e:
        logging.getLogger(__name__).exception("❌ Unexpected error: %s", e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
