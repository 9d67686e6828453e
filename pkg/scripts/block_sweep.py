"""Sweep the block count of the full-duplex block scheme on the toy profile.

Each block count trains its own model (cached), then the script writes
sweep.csv, sweep.png and the argmax summary under the run directory.

Usage: python scripts/block_sweep.py [--blocks 1,2,3,6] [--out runs]
"""

import argparse
import sys

from relayjscc.cli import main


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--blocks", default="1,2,3,6")
    ap.add_argument("--out", default="runs")
    ap.add_argument("--cache", default="runs/cache")
    ap.add_argument("--epochs", type=int, default=200)
    args = ap.parse_args(argv)
    return main(
        [
            "sweep-b",
            "--profile", "toy",
            "--mode", "fd_pf",
            "--blocks", args.blocks,
            "--out", args.out,
            "--cache", args.cache,
            "--set", f"train.max_epochs={args.epochs}",
        ]
    )


if __name__ == "__main__":
    sys.exit(run())
