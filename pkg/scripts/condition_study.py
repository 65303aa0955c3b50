"""Condition numbers of the stacked multi-stream Gram matrix against the
per-bin single-antenna-bin Gram matrix, M=16, K=8, L=4, L_k=2 by default."""

import argparse
import json

from cpscm.analysis import condition_study


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=16)
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--L", type=int, default=4)
    ap.add_argument("--streams", type=int, default=2)
    ap.add_argument("--trials", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    report = condition_study(args.M, args.K, args.L, args.streams, args.trials, seed=args.seed)
    print(json.dumps(report.summary(), indent=2))


if __name__ == "__main__":
    main()
