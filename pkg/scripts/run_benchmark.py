#!/usr/bin/env python3
"""Full benchmark sweep: certificate check plus all four trigger rules.

Runs the bundled Chua benchmark through `check`, a single `run` per rule
(for trajectory/event CSVs suitable for overlay plots), and one
`ensemble` per rule.  Output lands in one directory per rule under
--out; the printed table summarizes fitted decay rates and trigger
counts so the continuous/discrete monitoring trade-off is visible at a
glance.

Usage:
    python scripts/run_benchmark.py [--out DIR] [--trials N] [--preset NAME]
"""

import argparse
import sys
from pathlib import Path

from pinsync import cli

RULES = ("cont-state", "cont-exp", "disc-state", "disc-exp")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="benchmark-out")
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--preset", default="chua_benchmark")
    args = parser.parse_args()

    out = Path(args.out)
    rc = cli.main(["check", "--config", args.preset, "--out", str(out / "check")])
    if rc == 2:
        return rc
    if rc == 1:
        print("certificate infeasible; continuing with exploratory runs", file=sys.stderr)

    for rule in RULES:
        rule_dir = out / rule
        print(f"--- {rule} ---")
        cli.main(["run", "--config", args.preset, "--rule", rule, "--out", str(rule_dir)])
        cli.main(["ensemble", "--config", args.preset, "--rule", rule,
                  "--trials", str(args.trials), "--out", str(rule_dir)])
    print(f"done; inspect {out}/<rule>/ensemble.csv and manifest.json for fitted rates")
    return 0


if __name__ == "__main__":
    sys.exit(main())
