"""Fast structural checks behind the ``verify`` subcommand.

Each check returns ``(passed, detail)``. They are deliberately small so the
whole suite runs in well under a minute.
"""

from __future__ import annotations

import io
import time
from typing import Callable

import numpy as np

from .channel import NoiseModel, PowerDelayProfile, add_noise, draw_channels, propagate
from .config import parse_config
from .detection import (DetectorConfig, assemble_A, assemble_B, assemble_composite,
                        detect_frame, fd_despread, mmse_detect_multi, mmse_detect_single)
from .oracle import dense_mmse
from .sim import run_sweep
from .waveform import (StreamAllocation, add_cp, assemble_frame, build_spreading,
                       expand_and_shift, random_streams, remove_cp)

Check = Callable[[], "tuple[bool, str]"]


def _random_link(rng, N, L, M, Lk, L_h=None, root=1):
    # stacked matrices have rank <= M * min(L, L_h), so default to L_h >= L
    L_h = max(4, L) if L_h is None else L_h
    alloc = StreamAllocation(L, Lk)
    Z = build_spreading(N, root)
    ch = draw_channels(M, len(Lk), PowerDelayProfile.uniform(L_h), N, rng)
    streams = random_streams(alloc, N, rng)
    frames = [assemble_frame(s, alloc, Z, max(L_h - 1, 0)) for s in streams]
    truth = np.array([s.symbols for ue in streams for s in ue])
    return alloc, Z, ch, frames, truth


def check_zc_unitarity() -> tuple[bool, str]:
    worst = 0.0
    for N, root in [(4, 1), (16, 3), (64, 1), (256, 5), (1024, 1), (63, 2), (139, 7)]:
        Z = build_spreading(N, root)
        worst = max(worst, float(np.max(np.abs(np.abs(Z.fd_diag) - 1))))
    return worst < 1e-10, f"max | |fd_diag| - 1 | = {worst:.2e}"


def check_phase_ramp(seed: int = 0) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for L in (2, 4, 8):
        for N in (8, 16, 32, 64):
            if N % L:
                continue
            s = rng.standard_normal(N // L) + 1j * rng.standard_normal(N // L)
            psi = np.exp(-2j * np.pi * np.arange(N) / N)
            tiled = np.tile(np.fft.fft(s, norm="ortho"), L) / np.sqrt(L)
            for shift in range(L):
                lhs = np.fft.fft(expand_and_shift(s, L, shift), norm="ortho")
                worst = max(worst, float(np.max(np.abs(lhs - psi ** shift * tiled))))
    return worst < 1e-9, f"max error {worst:.2e}"


def check_energy(seed: int = 1) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N, L, Lk in [(16, 2, (1, 2)), (64, 4, (4, 3, 1)), (1024, 8, (8, 5))]:
        alloc, Z, _, frames, _ = _random_link(rng, N, L, 1, Lk)
        streams = random_streams(alloc, N, rng)
        for ue in streams:
            x = assemble_frame(ue, alloc, Z).payload
            ref = sum(np.sum(np.abs(s.symbols) ** 2) for s in ue)
            worst = max(worst, abs(np.sum(np.abs(x) ** 2) - ref))
    return worst < 1e-10, f"max energy mismatch {worst:.2e}"


def check_cp_round_trip(seed: int = 2) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    ok = True
    for N, ncp in [(4, 2), (16, 0), (64, 15), (1024, 32)]:
        x = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        tx = add_cp(x, ncp)
        ok &= tx.size == N + ncp and np.array_equal(tx[:ncp], x[N - ncp:])
        ok &= np.array_equal(remove_cp(tx, ncp), x)
    return bool(ok), "exact" if ok else "mismatch"


def check_noiseless_identity(seed: int = 3) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N, L, M, Lk, mode in [(32, 4, 2, (1,) * 6, "single"), (32, 4, 2, (3, 2, 1), "multi"),
                              (64, 8, 4, (1,) * 20, "single"), (64, 2, 3, (2, 1, 2), "multi")]:
        alloc, Z, ch, frames, truth = _random_link(rng, N, L, M, Lk)
        y = propagate(frames, ch)
        det = detect_frame(y, ch, alloc, Z, DetectorConfig(0.0, "diagonal", mode))
        worst = max(worst, float(np.max(np.abs(det.symbols - truth))))
    return worst < 1e-8, f"max error {worst:.2e}"


def check_mode_equivalence(seed: int = 4) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N, L, M, K, nv in [(32, 4, 2, 5, 0.1), (64, 8, 4, 20, 0.01), (16, 1, 4, 3, 0.5)]:
        alloc, Z, ch, frames, _ = _random_link(rng, N, L, M, (1,) * K)
        y = add_noise(propagate(frames, ch), NoiseModel(nv), rng)
        ybar = assemble_composite(fd_despread(y, Z), np.arange(N // L), L)
        single = mmse_detect_single(ybar, assemble_A(ch, np.arange(N // L), L),
                                    DetectorConfig(nv, mode="single"))
        multi = mmse_detect_multi(ybar, assemble_B(ch, alloc, np.arange(N // L)),
                                  DetectorConfig(nv, mode="multi"))
        worst = max(worst, float(np.max(np.abs(single.estimate - multi.estimate))))
    return worst < 1e-10, f"max difference {worst:.2e}"


ORACLE_CASES = [
    # N, L, M, L_k per UE, mode
    (16, 1, 3, (1, 1), "single"),
    (16, 2, 2, (1, 1, 1), "single"),
    (16, 4, 2, (3,), "multi"),
    (32, 4, 3, (2, 1, 4, 3), "multi"),
    (32, 2, 4, (1,) * 7, "single"),
    (24, 4, 1, (2, 1), "multi"),
]


def check_oracle(seed: int = 5) -> tuple[bool, str]:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for N, L, M, Lk, mode in ORACLE_CASES:
        alloc, Z, ch, frames, _ = _random_link(rng, N, L, M, Lk)
        y = add_noise(propagate(frames, ch), NoiseModel(0.1), rng)
        det = detect_frame(y, ch, alloc, Z, DetectorConfig(0.1, "diagonal", mode))
        ref = dense_mmse(y, ch, alloc, Z, 0.1, "diagonal")
        worst = max(worst, float(np.max(np.abs(det.symbols - ref))))
    return worst < 1e-8, f"max error vs dense oracle {worst:.2e}"


def check_determinism() -> tuple[bool, str]:
    texts = []
    for threads in (1, 8):
        cfg = parse_config(base=dict(N=64, L=4, M=4, K=3, Lk=(2, 1, 3), L_h=8, mode="scm-multi",
                                     es_n0_db=(0, 10, 20), trials=6, seed=1234, threads=threads))
        buf = io.StringIO()
        run_sweep(cfg, buf)
        texts.append(buf.getvalue().encode())
    same = texts[0] == texts[1]
    return same, "byte-identical CSV for 1 and 8 threads" if same else "CSV differs across thread counts"


CHECKS: dict[str, Check] = {
    "zc-unitarity": check_zc_unitarity,
    "phase-ramp-identity": check_phase_ramp,
    "energy-conservation": check_energy,
    "cp-round-trip": check_cp_round_trip,
    "noiseless-end-to-end": check_noiseless_identity,
    "detector-mode-equivalence": check_mode_equivalence,
    "dense-oracle": check_oracle,
    "seed-thread-determinism": check_determinism,
}


def run_all(out=print) -> bool:
    all_ok = True
    for name, check in CHECKS.items():
        t0 = time.perf_counter()
        try:
            ok, detail = check()
        except Exception as exc:  # report and keep going
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'}  {name:28s} {detail} ({time.perf_counter() - t0:.2f}s)")
    return all_ok
