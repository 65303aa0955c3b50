"""Command line entry point: ``simulate``, ``presets`` and ``verify``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, list_presets, parse_config, preset
from .detection import DegenerateSystemError
from .sim import SweepInterrupted, run_sweep

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INTERRUPT = 0, 1, 2, 3, 130


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpscm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a seeded gain sweep and write CSV")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="key = value config file")
    src.add_argument("--preset", help="named preset (see `presets`)")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--trials", type=int)
    sim.add_argument("--threads", type=int)
    sim.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    sim.add_argument("--report", type=Path, help="JSON run report (default: <out>.report.json)")
    sim.add_argument("--mode", choices=["scm-single", "scm-multi", "ofdm-baseline"])
    sim.add_argument("--es-n0", type=_float_list, dest="es_n0_db",
                     help="comma-separated Es/N0 sweep in dB")

    sub.add_parser("presets", help="list preset configurations")
    sub.add_parser("verify", help="run the structural invariant and oracle checks")
    return parser


def _simulate(args) -> int:
    overrides = {"seed": args.seed, "trials": args.trials, "threads": args.threads,
                 "mode": args.mode, "es_n0_db": args.es_n0_db}
    if args.preset:
        configs = preset(args.preset, **overrides)
    else:
        configs = [parse_config(args.config, overrides)]
    out_path = args.out or (Path(configs[0].out) if configs[0].out else None)

    def progress(done, total):
        if done == total or done % max(1, total // 10) == 0:
            logging.getLogger("cpscm").info("  %d/%d trials", done, total)

    fh = open(out_path, "w", newline="") if out_path else sys.stdout
    interrupted = False
    try:
        report = run_sweep(configs, fh, progress)
    except SweepInterrupted as exc:
        report, interrupted = exc.partial, True
    finally:
        if out_path:
            fh.close()
    report_path = args.report or (out_path.with_suffix(out_path.suffix + ".report.json") if out_path else None)
    if report_path:
        report_path.write_text(report.to_json())
    print(report.summary(), file=sys.stderr)
    print(f"wall clock {report.wall_clock:.1f}s, seed {report.seed}", file=sys.stderr)
    if interrupted:
        print("interrupted: partial results written", file=sys.stderr)
        return EXIT_INTERRUPT
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "presets":
            print(list_presets())
            return EXIT_OK
        if args.command == "verify":
            from .verify import run_all
            return EXIT_OK if run_all() else EXIT_FAIL
        return _simulate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateSystemError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
