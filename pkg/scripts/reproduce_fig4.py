"""Multi-stream gain for M=64, L=8, K=32 with L_k in {2, 3, 4}, plus the
single-stream K=64 curve that the L_k=2 case should coincide with.

    python3 scripts/reproduce_fig4.py --trials 50 --out fig4.csv
"""

import argparse
import sys

import numpy as np

from cpscm.config import preset
from cpscm.sim import run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--small", action="store_true", help="use the fig4-small preset")
    ap.add_argument("--out", default="fig4.csv")
    args = ap.parse_args()

    kw = dict(trials=args.trials, seed=args.seed, threads=args.threads)
    configs = preset("fig4-small" if args.small else "fig4", **kw)
    # reference: single-stream with K = 2 * K_fig4 users
    ref = configs[0].replace(K=2 * configs[0].K, Lk=None, mode="scm-single", name="reference")
    with open(args.out, "w", newline="") as fh:
        report = run_sweep(configs + [ref], fh)
    print(report.summary(), file=sys.stderr)
    gap = np.abs(report.curves[0].gains_db() - report.curves[-1].gains_db())
    print(f"max |L_k=2 - single-stream 2K| = {gap.max():.3f} dB", file=sys.stderr)


if __name__ == "__main__":
    main()
