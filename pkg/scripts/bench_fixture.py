#!/usr/bin/env python3
"""Sweep orderings and sampled bases on a fixture and report size quantiles.

Example:
    python scripts/bench_fixture.py two_conics --orderings 10 --bases 5
"""

import argparse
import sys

from elimtpl.cli import main as cli_main


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem", help="fixture name or problem file")
    ap.add_argument("--orderings", type=int, default=10)
    ap.add_argument("--bases", type=int, default=0)
    ap.add_argument("--action", default="all")
    ap.add_argument("--schur", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("-o", "--output", default="bench_report.csv")
    args = ap.parse_args()
    argv = [
        "bench", args.problem, "-o", args.output,
        "--orderings", str(args.orderings), "--bases", str(args.bases),
        "--action", args.action, "--seed", str(args.seed), "--jobs", str(args.jobs),
    ]
    if args.schur:
        argv.append("--schur")
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
