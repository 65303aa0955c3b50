"""Inverse-trace statistics: i.i.d. Wishart matrices and composite matrices
built from simulated multipath channels, against K/(ML - K)."""

import argparse

from cpscm.analysis import composite_trace_check, wishart_trace_mc


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    for m_eff, k in [(8, 4), (16, 8), (32, 16), (8, 1)]:
        v = wishart_trace_mc(m_eff, k, args.trials, seed=args.seed)
        print(f"wishart M_eff={m_eff:3d} K={k:3d}: {v:.4f} (exact {k / (m_eff - k):.4f})")

    draws = max(1, args.trials // 50)
    for M, K, L, L_h, streams in [(16, 8, 4, 32, 1), (16, 8, 4, 32, 2), (4, 4, 4, 16, 2),
                                  (4, 4, 4, 1, 1)]:
        chk = composite_trace_check(M, K, L, L_h, draws, streams=streams, seed=args.seed)
        print(f"composite M={M} K={K} L={L} L_h={L_h} L_k={streams}: "
              f"{chk.measured:.4f} +/- {chk.stderr:.4f} (expected {chk.expected:.4f})")


if __name__ == "__main__":
    main()
