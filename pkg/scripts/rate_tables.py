"""Analytic decode/compress-forward rate tables and plots for both duplex
modes over the standard 4x4 link grid at P_s = P_r = 3 dB.

Usage: python scripts/rate_tables.py [--out runs/rates] [--step 1e-3]
"""

import argparse
import sys

from relayjscc.cli import main


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/rates")
    ap.add_argument("--step", type=float, default=1e-3)
    args = ap.parse_args(argv)
    for duplex in ("hd", "fd"):
        code = main(
            [
                "rates",
                "--duplex", duplex,
                "--out", args.out,
                "--step", str(args.step),
            ]
        )
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(run())
