#!/usr/bin/env python3
"""End-to-end default run: graph -> traces -> sequence model -> strategy
pool -> DQN training -> greedy evaluation, all through the CLI so the
artifacts land exactly as a user would get them.

Usage:
    python3 scripts/run_pipeline.py [--out-dir DIR] [--set KEY=VALUE ...]
"""

import argparse
import sys

from hubguard.cli import main as hub


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="runs/pipeline")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args()

    overrides = [f for kv in args.set for f in ("--set", kv)]
    code = hub(["train", *overrides, "--out-dir", args.out_dir])
    if code != 0:
        return code
    return hub([
        "evaluate", *overrides,
        "--checkpoint", f"{args.out_dir}/checkpoint.txt",
        "--graph", f"{args.out_dir}/graph.txt",
        "--pool", f"{args.out_dir}/pool.txt",
        "--out", f"{args.out_dir}/greedy_trace.csv",
    ])


if __name__ == "__main__":
    sys.exit(main())
