"""Single-stream processing gain versus Es/N0 for M=64, L=8, K in {32, 64, 128}.

Writes one CSV with a row per (curve, Es/N0) point, including the M - K/L
asymptote, and prints the highest-Es/N0 gain of each curve.

    python3 scripts/reproduce_fig2.py --trials 50 --out fig2.csv
    python3 scripts/reproduce_fig2.py --small          # desk-scale variant
"""

import argparse
import sys

from cpscm.config import preset
from cpscm.sim import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--small", action="store_true", help="use the fig2-small preset")
    ap.add_argument("--out", default="fig2.csv")
    args = ap.parse_args()

    configs = preset("fig2-small" if args.small else "fig2",
                     trials=args.trials, seed=args.seed, threads=args.threads)
    with open(args.out, "w", newline="") as fh:
        report = run_sweep(configs, fh)
    print(report.summary(), file=sys.stderr)


if __name__ == "__main__":
    main()
