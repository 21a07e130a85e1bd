#!/usr/bin/env python3
"""Run the synthetic parameter-recovery study and write the report.

Usage: python3 scripts/run_study.py [--seed S] [--config Y] [--out DIR]
Equivalent to `epiabc study`; kept as a script for batch runs.
"""

import argparse
import sys

from epiabc.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=20260814)
    parser.add_argument("--config", default=None)
    parser.add_argument("--out", default="results/study")
    parser.add_argument("--archive", default="results/study_archive")
    args = parser.parse_args()
    argv = ["study", "--seed", str(args.seed), "--out", args.out,
            "--archive", args.archive]
    if args.config:
        argv += ["--config", args.config]
    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
