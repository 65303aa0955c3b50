"""
Processing-gain measurement and the closed-form results it is checked against.

The processing gain of a detector is the ratio of the per-symbol output
Es/N0 to the per-antenna input Es/N0. With unit-variance symbols and unbiased
estimates the output Es/N0 is ``1/MSE``, so the gain is ``noise_var / MSE``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import NoiseModel, PowerDelayProfile, as_generator, complex_normal, draw_channels
from .seeding import CHANNEL, DATA, NOISE, substream
from .detection import DetectedFrame, assemble_A, assemble_B, regularized_solve
from .waveform import StreamAllocation, map_symbols

__all__ = [
    "CSV_FIELDS",
    "db",
    "asymptotic_gain_single",
    "asymptotic_gain_multi",
    "GainAccumulator",
    "GainPoint",
    "GainCurve",
    "TraceCheck",
    "ConditionReport",
    "measure_gain",
    "wishart_trace_mc",
    "composite_trace_check",
    "condition_study",
    "ofdm_baseline_gain",
    "curve_rows",
]

CSV_FIELDS = (
    "es_n0_db", "gain_db", "gain_db_stderr", "asymptote_db", "mse", "trials",
    "mode", "M", "K", "L", "Lk_profile", "normalized_gain_db",
)

DB_PER_NEPER = 10.0 / math.log(10.0)


def db(x):
    return 10.0 * np.log10(x)


def asymptotic_gain_single(M: int, K: int, L: int) -> float:
    """High-SNR gain of single-stream detection, ``M - K/L``."""
    if K >= M * L:
        raise ValueError(f"K ({K}) must be < ML ({M * L})")
    return M - K / L


def asymptotic_gain_multi(M: int, L: int, streams_per_ue: Sequence[int]) -> float:
    """High-SNR gain with ``K_v = sum(L_k)`` virtual users, ``M - K_v/L``."""
    K_v = int(sum(streams_per_ue))
    if K_v >= M * L:
        raise ValueError(f"K_v ({K_v}) must be < ML ({M * L})")
    return M - K_v / L


@dataclass
class GainAccumulator:
    """Running sums over per-frame MSE values. Merging is associative."""

    noise_var: float
    es_n0_db: float | None = None
    count: int = 0
    mse_sum: float = 0.0
    mse_sumsq: float = 0.0
    gain_sum: float = 0.0
    gain_sumsq: float = 0.0

    def add(self, frame_mse: float) -> None:
        g = self.noise_var / frame_mse
        self.count += 1
        self.mse_sum += frame_mse
        self.mse_sumsq += frame_mse * frame_mse
        self.gain_sum += g
        self.gain_sumsq += g * g

    def merge(self, other: "GainAccumulator") -> "GainAccumulator":
        if other.noise_var != self.noise_var:
            raise ValueError("cannot merge accumulators at different noise levels")
        return GainAccumulator(
            self.noise_var,
            self.es_n0_db,
            self.count + other.count,
            self.mse_sum + other.mse_sum,
            self.mse_sumsq + other.mse_sumsq,
            self.gain_sum + other.gain_sum,
            self.gain_sumsq + other.gain_sumsq,
        )

    def point(self, asymptote: float = math.nan) -> "GainPoint":
        if self.count == 0:
            raise ValueError("no frames accumulated")
        n = self.count
        mse = self.mse_sum / n
        if n > 1:
            var = max(self.mse_sumsq - n * mse * mse, 0.0) / (n - 1)
            mse_se = math.sqrt(var / n)
            gmean = self.gain_sum / n
            gvar = max(self.gain_sumsq - n * gmean * gmean, 0.0) / (n - 1)
        else:
            mse_se = math.nan
            gvar = math.nan
        return GainPoint(
            es_n0_db=(float(NoiseModel(self.noise_var).es_n0_db) if self.es_n0_db is None
                      else float(self.es_n0_db)),
            noise_var=self.noise_var,
            mse=mse,
            mse_stderr=mse_se,
            trials=n,
            asymptote=asymptote,
            frame_gain_var=gvar,
        )


@dataclass(frozen=True)
class GainPoint:
    es_n0_db: float
    noise_var: float
    mse: float
    mse_stderr: float
    trials: int
    asymptote: float = math.nan
    frame_gain_var: float = math.nan

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("a gain point needs at least one trial")
        if not self.mse > 0:
            raise ValueError(f"MSE must be positive, got {self.mse}")

    @property
    def es_n0(self) -> float:
        return 10.0 ** (self.es_n0_db / 10.0)

    @property
    def gain(self) -> float:
        return self.noise_var / self.mse

    @property
    def gain_db(self) -> float:
        return float(db(self.gain))

    @property
    def gain_db_stderr(self) -> float:
        # delta method on 10*log10(noise_var / mse)
        return DB_PER_NEPER * self.mse_stderr / self.mse

    @property
    def asymptote_db(self) -> float:
        return float(db(self.asymptote)) if self.asymptote > 0 else math.nan

    @property
    def normalized_gain_db(self) -> float:
        return self.gain_db - self.asymptote_db


@dataclass
class GainCurve:
    """Gain points of one configuration, in increasing Es/N0 order."""

    mode: str
    M: int
    K: int
    L: int
    profile: str
    points: list[GainPoint] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        es = [p.es_n0_db for p in self.points]
        if any(b <= a for a, b in zip(es, es[1:])):
            raise ValueError("gain curve Es/N0 values must be strictly increasing")

    def gains_db(self) -> np.ndarray:
        return np.array([p.gain_db for p in self.points])

    def stderr_db(self) -> np.ndarray:
        return np.array([p.gain_db_stderr for p in self.points])

    def is_monotone(self, n_sigma: float = 2.0) -> bool:
        """Non-decreasing gain, allowing dips within ``n_sigma`` combined
        standard errors of adjacent points."""
        g = self.gains_db()
        se = np.nan_to_num(self.stderr_db())
        for i in range(len(g) - 1):
            tol = n_sigma * math.hypot(se[i], se[i + 1])
            if g[i + 1] < g[i] - tol:
                return False
        return True


def curve_rows(curve: GainCurve) -> list[dict]:
    """CSV rows (as dicts keyed by :data:`CSV_FIELDS`) for one curve."""
    rows = []
    for p in curve.points:
        rows.append({
            "es_n0_db": f"{p.es_n0_db:.4f}",
            "gain_db": f"{p.gain_db:.6f}",
            "gain_db_stderr": f"{p.gain_db_stderr:.6f}",
            "asymptote_db": f"{p.asymptote_db:.6f}",
            "mse": f"{p.mse:.9e}",
            "trials": str(p.trials),
            "mode": curve.mode,
            "M": str(curve.M),
            "K": str(curve.K),
            "L": str(curve.L),
            "Lk_profile": curve.profile,
            "normalized_gain_db": f"{p.normalized_gain_db:.6f}",
        })
    return rows


def frame_mse(estimate, truth) -> float:
    est = estimate.symbols if isinstance(estimate, DetectedFrame) else np.asarray(estimate)
    truth = np.asarray(truth)
    if est.shape != truth.shape:
        raise ValueError(f"estimate shape {est.shape} != truth shape {truth.shape}")
    return float(np.mean(np.abs(est - truth) ** 2))


def measure_gain(pairs: Iterable[tuple], noise: NoiseModel, asymptote: float = math.nan) -> GainPoint:
    """Processing gain from ``(estimate, truth)`` frame pairs.

    ``estimate`` may be a :class:`DetectedFrame` or an array shaped like ``truth``.
    """
    acc = GainAccumulator(noise.variance)
    for est, truth in pairs:
        acc.add(frame_mse(est, truth))
    if acc.count == 0:
        raise ValueError("measure_gain needs at least one frame")
    return acc.point(asymptote)


def wishart_trace_mc(M_eff: int, K_cols: int, trials: int, seed=None,
                     batch: int = 2000) -> float:
    """Monte-Carlo mean of ``tr((A^H A)^{-1})`` for i.i.d. CN(0,1) ``M_eff x K_cols`` A.

    The exact value is ``K_cols / (M_eff - K_cols)``.
    """
    if M_eff <= K_cols:
        raise ValueError(f"M_eff ({M_eff}) must exceed K_cols ({K_cols}); the mean diverges otherwise")
    rng = as_generator(seed)
    total = 0.0
    done = 0
    while done < trials:
        b = min(batch, trials - done)
        A = complex_normal(rng, (b, M_eff, K_cols))
        gram = np.matmul(A.conj().swapaxes(-1, -2), A)
        total += float(np.trace(np.linalg.inv(gram), axis1=-2, axis2=-1).real.sum())
        done += b
    return total / trials


@dataclass(frozen=True)
class TraceCheck:
    measured: float
    expected: float
    stderr: float
    trials: int
    K_v: int
    ML: int
    note: str

    @property
    def rel_error(self) -> float:
        return abs(self.measured - self.expected) / self.expected


TRACE_NOTE = ("measured = mean over bins/draws of tr((Bbar^H Bbar)^-1)/L, where Bbar "
              "already includes 1/sqrt(L); expected = K_v/(ML-K_v)")


def composite_trace_check(M: int, K: int, L: int, L_h: int, trials: int,
                          streams: int | Sequence[int] = 1, N: int | None = None,
                          seed=None, pdp: PowerDelayProfile | None = None) -> TraceCheck:
    """Inverse-trace statistic of composite matrices built from simulated channels."""
    Lk = (streams,) * K if isinstance(streams, int) else tuple(streams)
    alloc = StreamAllocation(L, Lk)
    alloc.check_antennas(M)
    if L_h < L:
        warnings.warn(f"L_h={L_h} < L={L}: aliased bins are strongly correlated, "
                      "the inverse-trace statistic will not follow the Wishart value",
                      RuntimeWarning, stacklevel=2)
    if N is None:
        N = L * max(16, -(-L_h // L))
    if pdp is None:
        pdp = PowerDelayProfile.uniform(L_h)
    rng = as_generator(seed)
    bins = np.arange(N // L)
    per_trial = np.empty(trials)
    for t in range(trials):
        ch = draw_channels(M, K, pdp, N, rng)
        B = assemble_B(ch, alloc, bins).matrix
        gram = np.matmul(B.conj().swapaxes(-1, -2), B)
        # eigenvalues guard against the flat-channel case where gram is singular
        ev = np.linalg.eigvalsh(gram)
        ev = np.maximum(ev, np.finfo(float).tiny)
        per_trial[t] = np.mean(np.sum(1.0 / ev, axis=-1)) / L
    se = float(per_trial.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return TraceCheck(float(per_trial.mean()), alloc.K_v / (M * L - alloc.K_v), se,
                      trials, alloc.K_v, M * L, TRACE_NOTE)


@dataclass(frozen=True)
class ConditionReport:
    cond_B: np.ndarray
    cond_A: np.ndarray

    def __post_init__(self):
        if np.any(self.cond_B < 1 - 1e-9) or np.any(self.cond_A < 1 - 1e-9):
            raise ValueError("condition numbers must be >= 1")

    @staticmethod
    def _summary(x) -> dict:
        q1, med, q3 = np.percentile(x, [25, 50, 75])
        return {"q1": float(q1), "median": float(med), "q3": float(q3)}

    def summary(self) -> dict:
        return {"B": self._summary(self.cond_B), "A": self._summary(self.cond_A),
                "trials": int(self.cond_B.size)}


def _hermitian_cond(gram) -> np.ndarray:
    ev = np.linalg.eigvalsh(gram)
    return ev[..., -1] / ev[..., 0]


def condition_study(M: int, K: int, L: int, streams: int | Sequence[int], trials: int,
                    L_h: int = 16, N: int | None = None, seed=None) -> ConditionReport:
    """Condition numbers of ``Bbar^H Bbar`` against the per-bin ``A^H A``.

    One channel draw per trial; both matrices are taken at the same random base bin.
    """
    Lk = (streams,) * K if isinstance(streams, int) else tuple(streams)
    alloc = StreamAllocation(L, Lk)
    alloc.check_antennas(M)
    if N is None:
        N = L * max(16, -(-L_h // L))
    rng = as_generator(seed)
    pdp = PowerDelayProfile.uniform(L_h)
    cond_B = np.empty(trials)
    cond_A = np.empty(trials)
    for t in range(trials):
        ch = draw_channels(M, K, pdp, N, rng)
        n = int(rng.integers(N // L))
        B = assemble_B(ch, alloc, n).matrix
        A = ch.freq[:, :, n]
        cond_B[t] = _hermitian_cond(B.conj().T @ B)
        cond_A[t] = _hermitian_cond(A.conj().T @ A)
    return ConditionReport(cond_B, cond_A)


def ofdm_trial(M: int, K: int, L: int, N: int, pdp: PowerDelayProfile, noise_vars: Sequence[float],
               rng_channel, rng_data, rng_noise: Sequence, unbias: str = "diagonal") -> list[float]:
    """One DFT-precoded OFDM frame detected at several noise levels.

    The K users are split into L groups of K/L; group ``g`` occupies the
    contiguous subcarriers ``[g*N/L, (g+1)*N/L)``. Returns the frame MSE at
    every noise level.
    """
    Kg, nb = K // L, N // L
    ch = draw_channels(M, K, pdp, N, rng_channel)
    bits = as_generator(rng_data).integers(0, 2, size=(K, 2 * nb))
    s = np.stack([map_symbols(b, nb) for b in bits])
    s_fd = np.fft.fft(s, axis=-1, norm="ortho")
    # per-subcarrier M x K/L matrices, subcarrier-major: (N, M, Kg)
    A = np.empty((N, M, Kg), dtype=complex)
    x = np.empty((N, Kg), dtype=complex)
    for g in range(L):
        sc = slice(g * nb, (g + 1) * nb)
        users = slice(g * Kg, (g + 1) * Kg)
        A[sc] = np.moveaxis(ch.freq[:, users, sc], -1, 0)
        x[sc] = s_fd[users].T
    clean = np.einsum("nmk,nk->nm", A, x)
    gram = np.matmul(A.conj().swapaxes(-1, -2), A)
    out = []
    for nv, rng in zip(noise_vars, rng_noise):
        y = clean + complex_normal(as_generator(rng), clean.shape, nv)
        res = regularized_solve(A, y, nv, gram)
        est = res.estimate / res.bias if unbias == "diagonal" else res.estimate
        est_fd = np.empty_like(s_fd)
        for g in range(L):
            est_fd[g * Kg:(g + 1) * Kg] = est[g * nb:(g + 1) * nb].T
        s_hat = np.fft.ifft(est_fd, axis=-1, norm="ortho")
        out.append(float(np.mean(np.abs(s_hat - s) ** 2)))
    return out


def ofdm_baseline_gain(M: int, K: int, L: int, es_n0_db: Sequence[float], trials: int,
                       N: int = 256, L_h: int = 16, seed: int = 0,
                       pdp: PowerDelayProfile | None = None) -> GainCurve:
    """Gain curve of DFT-precoded OFDM with per-subcarrier MMSE detection."""
    if K % L:
        raise ValueError(f"K ({K}) must be divisible by L ({L}) for the OFDM baseline")
    if N % L:
        raise ValueError(f"N ({N}) must be divisible by L ({L})")
    if K // L >= M:
        raise ValueError(f"K/L ({K // L}) must be < M ({M})")
    pdp = PowerDelayProfile.uniform(L_h) if pdp is None else pdp
    noise_vars = [NoiseModel.from_es_n0_db(e).variance for e in es_n0_db]
    accs = [GainAccumulator(nv, e) for nv, e in zip(noise_vars, es_n0_db)]
    for t in range(trials):
        mses = ofdm_trial(M, K, L, N, pdp, noise_vars, substream(seed, t, CHANNEL),
                          substream(seed, t, DATA),
                          [substream(seed, t, NOISE, i) for i in range(len(noise_vars))])
        for acc, mse in zip(accs, mses):
            acc.add(mse)
    asym = M - K / L
    return GainCurve("ofdm-baseline", M, K, L, f"{K // L}/group",
                     [a.point(asym) for a in accs],
                     {"N": N, "L_h": L_h, "trials": trials})
