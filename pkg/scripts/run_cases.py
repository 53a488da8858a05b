#!/usr/bin/env python3
"""Run the three shipped scenarios end to end and summarize the results."""

import argparse
import json
import sys
import time
from pathlib import Path

from rodplan.cli import main as cli_main
from rodplan.scenario import fixture_path


def run(out_root: Path, cases, grid: str) -> int:
    worst = 0
    for name in cases:
        out = out_root / name
        t0 = time.perf_counter()
        code = cli_main(
            ["plan", str(fixture_path(name)), "--out", str(out), "--grid", grid]
        )
        wall = time.perf_counter() - t0
        report = json.loads((out / "report.json").read_text())
        solver = report["solver_report"]
        ver = report["verification"]
        print(
            f"{name}: exit={code} status={solver['status']} cost={solver['cost']:.2f} "
            f"tip_err={ver['tip_position_error']:.4f} clearances="
            f"{[round(c, 4) for c in ver['clearances']]} ({wall:.0f}s)"
        )
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out", help="output root directory")
    parser.add_argument("--cases", default="case1,case2,case3")
    parser.add_argument("--grid", default="101x101")
    args = parser.parse_args()
    sys.exit(run(Path(args.out), args.cases.split(","), args.grid))
