#!/usr/bin/env python3
"""Injection-threshold sweep: retrains the agent at each k and writes the
k vs average-episodic-reward CSV (the flat-plateau figure's data).

Usage:
    python3 scripts/sweep_threshold.py [--out FILE] [--k-values CSV]
                                       [--set KEY=VALUE ...]

The default grid is the low outlier 0.05 plus the 0.3..1.0 plateau.
"""

import argparse
import sys

from hubguard.cli import main as hub

DEFAULT_GRID = "0.05,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/sweep.csv")
    ap.add_argument("--k-values", default=DEFAULT_GRID)
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args()

    overrides = [f for kv in args.set for f in ("--set", kv)]
    return hub(["sweep-k", *overrides,
                "--k-values", args.k_values, "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
