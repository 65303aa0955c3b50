"""DFT-precoded OFDM (K/L users per contiguous subcarrier group) against
single-stream CP-SCM with all K users on every bin."""

import argparse

from cpscm.analysis import ofdm_baseline_gain
from cpscm.config import parse_config
from cpscm.sim import run_curve


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=16)
    ap.add_argument("--K", type=int, default=8)
    ap.add_argument("--L", type=int, default=4)
    ap.add_argument("--N", type=int, default=256)
    ap.add_argument("--L_h", type=int, default=16)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    sweep = (0.0, 10.0, 20.0, 30.0)
    ofdm = ofdm_baseline_gain(args.M, args.K, args.L, sweep, args.trials, N=args.N,
                              L_h=args.L_h, seed=args.seed)
    scm = run_curve(parse_config(base=dict(N=args.N, L=args.L, M=args.M, K=args.K, L_h=args.L_h,
                                           es_n0_db=sweep, trials=args.trials, seed=args.seed)))
    print("Es/N0   OFDM    SCM   (dB)")
    for a, b in zip(ofdm.points, scm.points):
        print(f"{a.es_n0_db:5.1f} {a.gain_db:6.2f} {b.gain_db:6.2f}")
    print(f"asymptote M - K/L = {args.M - args.K / args.L:g}")


if __name__ == "__main__":
    main()
