"""Seeded Monte-Carlo gain sweeps and their CSV / report output.

Every trial draws one channel, one set of payload streams and, per Es/N0
point, one noise block. All three come from counter-based substreams keyed by
``(seed, trial, purpose[, point])``, and the channel-only part of the detector
is computed once per trial and reused across noise levels.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np

from . import __version__
from .analysis import (CSV_FIELDS, GainAccumulator, GainCurve, asymptotic_gain_multi,
                       curve_rows, frame_mse, ofdm_trial)
from .channel import NoiseModel, PowerDelayProfile, add_noise, draw_channels, propagate
from .config import SimConfig
from .detection import DetectorConfig, detect_frame, prepare_system
from .seeding import CHANNEL, DATA, NOISE, substream
from .waveform import assemble_frame, build_spreading, random_streams

__all__ = ["run_trial", "run_curve", "run_sweep", "RunReport", "SweepInterrupted"]

log = logging.getLogger(__name__)


class SweepInterrupted(KeyboardInterrupt):
    """Raised on Ctrl-C; ``partial`` holds the curves or report gathered so far."""

    def __init__(self, partial):
        super().__init__("sweep interrupted")
        self.partial = partial


def _pdp(cfg: SimConfig) -> PowerDelayProfile:
    return PowerDelayProfile.from_name(cfg.pdp, cfg.L_h, cfg.pdp_decay)


def run_trial(cfg: SimConfig, trial: int) -> list[float]:
    """Frame MSE at every Es/N0 point of ``cfg`` for one trial index."""
    noise_vars = [NoiseModel.from_es_n0_db(e).variance for e in cfg.es_n0_db]
    if cfg.mode == "ofdm-baseline":
        return ofdm_trial(cfg.M, cfg.K, cfg.L, cfg.N, _pdp(cfg), noise_vars,
                          substream(cfg.seed, trial, CHANNEL), substream(cfg.seed, trial, DATA),
                          [substream(cfg.seed, trial, NOISE, i) for i in range(len(noise_vars))],
                          cfg.unbias)

    alloc = cfg.allocation()
    Z = build_spreading(cfg.N, cfg.zc_root)
    ch = draw_channels(cfg.M, cfg.K, _pdp(cfg), cfg.N, substream(cfg.seed, trial, CHANNEL))
    streams = random_streams(alloc, cfg.N, substream(cfg.seed, trial, DATA), cfg.alphabet)
    frames = [assemble_frame(s, alloc, Z, cfg.cp_length) for s in streams]
    clean = propagate(frames, ch)
    truth = np.array([s.symbols for ue in streams for s in ue])

    mode = "single" if cfg.mode == "scm-single" else "multi"
    system = prepare_system(ch, alloc, mode)
    mses = []
    for i, nv in enumerate(noise_vars):
        y = add_noise(clean, NoiseModel(nv), substream(cfg.seed, trial, NOISE, i))
        det = detect_frame(y, ch, alloc, Z, DetectorConfig(nv, cfg.unbias, mode), system)
        mses.append(frame_mse(det, truth))
    return mses


def asymptote(cfg: SimConfig) -> float:
    return asymptotic_gain_multi(cfg.M, cfg.L, cfg.streams)


def _make_curve(cfg: SimConfig, accs: Sequence[GainAccumulator]) -> GainCurve:
    asym = asymptote(cfg)
    points = [a.point(asym) for a in accs if a.count]
    return GainCurve(cfg.mode, cfg.M, cfg.K, cfg.L, cfg.profile, points, cfg.to_dict())


def run_curve(cfg: SimConfig, progress: Callable[[int, int], None] | None = None) -> GainCurve:
    """All trials of one configuration, aggregated in trial order."""
    accs = [GainAccumulator(NoiseModel.from_es_n0_db(e).variance, e) for e in cfg.es_n0_db]
    trials = range(cfg.trials)
    try:
        if cfg.threads == 1:
            results = (run_trial(cfg, t) for t in trials)
            for done, mses in enumerate(results, 1):
                for acc, m in zip(accs, mses):
                    acc.add(m)
                if progress:
                    progress(done, cfg.trials)
        else:
            with ThreadPoolExecutor(cfg.threads) as pool:
                # map yields in submission order, so aggregation order is fixed
                for done, mses in enumerate(pool.map(lambda t: run_trial(cfg, t), trials), 1):
                    for acc, m in zip(accs, mses):
                        acc.add(m)
                    if progress:
                        progress(done, cfg.trials)
    except KeyboardInterrupt:
        raise SweepInterrupted([_make_curve(cfg, accs)] if accs[0].count else []) from None
    return _make_curve(cfg, accs)


@dataclass
class RunReport:
    configs: list[SimConfig]
    curves: list[GainCurve]
    wall_clock: float
    seed: int
    version: str = __version__
    interrupted: bool = False
    extra: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        write_csv(buf, self.curves)
        return buf.getvalue()

    def to_dict(self) -> dict:
        curves = []
        for c in self.curves:
            curves.append({
                "mode": c.mode, "M": c.M, "K": c.K, "L": c.L, "Lk_profile": c.profile,
                "points": [{
                    "es_n0_db": p.es_n0_db, "gain_db": p.gain_db,
                    "gain_db_stderr": _nan_to_none(p.gain_db_stderr),
                    "asymptote_db": p.asymptote_db, "mse": p.mse, "trials": p.trials,
                    "frame_gain_var": _nan_to_none(p.frame_gain_var),
                } for p in c.points],
            })
        return {
            "version": self.version,
            "seed": self.seed,
            "wall_clock_s": self.wall_clock,
            "interrupted": self.interrupted,
            "configs": [c.to_dict() for c in self.configs],
            "curves": curves,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def summary(self) -> str:
        lines = []
        for c in self.curves:
            top = c.points[-1]
            lines.append(f"{c.mode} M={c.M} K={c.K} L={c.L} Lk={c.profile}: "
                         f"{top.gain_db:.2f} +/- {top.gain_db_stderr:.2f} dB at "
                         f"{top.es_n0_db:g} dB (asymptote {top.asymptote_db:.2f} dB, "
                         f"{top.trials} frames)")
        return "\n".join(lines)


def _nan_to_none(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def write_csv(fh: TextIO, curves: Sequence[GainCurve], header: bool = True) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    if header:
        writer.writeheader()
    for c in curves:
        writer.writerows(curve_rows(c))


def run_sweep(configs: SimConfig | Sequence[SimConfig], out: TextIO | None = None,
              progress: Callable[[int, int], None] | None = None) -> RunReport:
    """Run every configuration; rows are written to ``out`` as each curve
    completes, and partial curves are flushed if the run is interrupted."""
    if isinstance(configs, SimConfig):
        configs = [configs]
    configs = list(configs)
    start = time.perf_counter()
    curves: list[GainCurve] = []
    if out is not None:
        write_csv(out, [])
    interrupted = False
    for cfg in configs:
        log.info("running %s mode=%s K=%d Lk=%s trials=%d", cfg.name or "config",
                 cfg.mode, cfg.K, cfg.profile, cfg.trials)
        try:
            curve = run_curve(cfg, progress)
        except SweepInterrupted as exc:
            curves.extend(exc.partial)
            if out is not None:
                write_csv(out, exc.partial, header=False)
                out.flush()
            interrupted = True
            break
        curves.append(curve)
        if out is not None:
            write_csv(out, [curve], header=False)
            out.flush()
    report = RunReport(configs, curves, time.perf_counter() - start,
                       configs[0].seed if configs else 0, interrupted=interrupted)
    if interrupted:
        raise SweepInterrupted(report)
    return report
