#!/usr/bin/env python3
"""Sweep surface orders on one scenario and print the cost/runtime ladder."""

import argparse
import sys
from pathlib import Path

from rodplan.cli import main as cli_main
from rodplan.scenario import fixture_path


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--case", default="case1", help="fixture name or scenario path")
    parser.add_argument("--orders", default="3,4,5,6")
    parser.add_argument("--out", default="out/sweep")
    parser.add_argument("--cold", action="store_true", help="no warm starts")
    args = parser.parse_args()
    scenario = args.case
    if not Path(scenario).exists():
        scenario = str(fixture_path(args.case))
    argv = ["sweep", scenario, "--orders", args.orders, "--out", args.out]
    if args.cold:
        argv.append("--cold")
    code = cli_main(argv)
    print(Path(args.out, "sweep.csv").read_text())
    sys.exit(code)
