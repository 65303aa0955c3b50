"""Random multipath channels, propagation with a cyclic prefix, and AWGN."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .waveform import UplinkFrame

__all__ = [
    "PowerDelayProfile",
    "ChannelRealization",
    "ChannelSet",
    "NoiseModel",
    "as_generator",
    "complex_normal",
    "draw_channels",
    "propagate",
    "add_noise",
]


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class PowerDelayProfile:
    variances: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.variances, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("PDP needs at least one tap")
        if np.any(v < 0):
            raise ValueError("PDP variances must be non-negative")
        if not np.isclose(v.sum(), 1.0):
            raise ValueError(f"PDP variances must sum to 1, got {v.sum()}")
        object.__setattr__(self, "variances", v)

    @property
    def L_h(self) -> int:
        return self.variances.size

    @classmethod
    def uniform(cls, L_h: int) -> "PowerDelayProfile":
        return cls(np.full(L_h, 1.0 / L_h))

    @classmethod
    def exponential(cls, L_h: int, decay: float = 4.0) -> "PowerDelayProfile":
        """Exponentially decaying profile, ``decay`` taps per e-fold."""
        v = np.exp(-np.arange(L_h) / decay)
        return cls(v / v.sum())

    @classmethod
    def from_name(cls, name: str, L_h: int, decay: float = 4.0) -> "PowerDelayProfile":
        if name == "uniform":
            return cls.uniform(L_h)
        if name == "exponential":
            return cls.exponential(L_h, decay)
        raise ValueError(f"unknown PDP shape {name!r}")


@dataclass(frozen=True)
class ChannelRealization:
    antenna: int
    ue: int
    taps: np.ndarray


@dataclass(frozen=True)
class ChannelSet:
    """Taps of all (antenna, UE) links and their N-point frequency responses.

    ``taps`` has shape ``(M, K, L_h)``; ``freq`` has shape ``(M, K, N)`` and
    holds the circulant eigenvalues, i.e. the plain DFT of the zero-padded taps.
    """

    taps: np.ndarray
    freq: np.ndarray

    @classmethod
    def from_taps(cls, taps, N: int) -> "ChannelSet":
        taps = np.asarray(taps, dtype=complex)
        if taps.ndim != 3:
            raise ValueError("taps must have shape (M, K, L_h)")
        if taps.shape[-1] > N:
            raise ValueError(f"L_h={taps.shape[-1]} exceeds N={N}")
        freq = np.fft.fft(taps, n=N, axis=-1)
        taps.setflags(write=False)
        freq.setflags(write=False)
        return cls(taps, freq)

    @property
    def M(self) -> int:
        return self.taps.shape[0]

    @property
    def K(self) -> int:
        return self.taps.shape[1]

    @property
    def L_h(self) -> int:
        return self.taps.shape[2]

    @property
    def N(self) -> int:
        return self.freq.shape[2]

    def realization(self, m: int, k: int) -> ChannelRealization:
        return ChannelRealization(m, k, self.taps[m, k])

    def circulant(self, m: int, k: int) -> np.ndarray:
        """Dense N x N circulant matrix of link (m, k); columns are downward
        cyclic shifts of the zero-padded taps."""
        col = np.zeros(self.N, dtype=complex)
        col[: self.L_h] = self.taps[m, k]
        idx = (np.arange(self.N)[:, None] - np.arange(self.N)[None, :]) % self.N
        return col[idx]


@dataclass(frozen=True)
class NoiseModel:
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError(f"noise variance must be >= 0, got {self.variance}")

    @classmethod
    def from_es_n0_db(cls, es_n0_db: float) -> "NoiseModel":
        return cls(10.0 ** (-es_n0_db / 10.0))

    @property
    def es_n0(self) -> float:
        return np.inf if self.variance == 0 else 1.0 / self.variance

    @property
    def es_n0_db(self) -> float:
        return 10.0 * np.log10(self.es_n0)


def draw_channels(M: int, K: int, pdp: PowerDelayProfile, N: int, seed=None) -> ChannelSet:
    """Independent Rayleigh multipath taps for every (antenna, UE) pair.

    The full ``(M, K, L_h)`` tap array comes from one generator in a fixed
    C order, so the draw depends only on the seed.
    """
    if M < 1 or K < 1:
        raise ValueError(f"M and K must be >= 1, got M={M}, K={K}")
    rng = as_generator(seed)
    taps = complex_normal(rng, (M, K, pdp.L_h)) * np.sqrt(pdp.variances)
    return ChannelSet.from_taps(taps, N)


def propagate(frames: Sequence[UplinkFrame], ch: ChannelSet, method: str = "fd") -> np.ndarray:
    """Noiseless received samples after CP removal, shape ``(M, N)``.

    ``method="fd"`` multiplies per bin by the cached frequency responses;
    ``method="linear"`` convolves the CP-extended frames and strips the CP.
    Both give the same result whenever the CP covers the channel memory.
    """
    if len(frames) != ch.K:
        raise ValueError(f"{len(frames)} frames for {ch.K} UEs")
    N = ch.N
    for f in frames:
        if f.payload.size != N:
            raise ValueError(f"UE {f.ue}: payload length {f.payload.size} != N={N}")
        if f.n_cp < ch.L_h - 1:
            raise ValueError(f"CP length {f.n_cp} shorter than channel memory {ch.L_h - 1}")
    order = [f.ue for f in frames]
    if sorted(order) != list(range(ch.K)):
        raise ValueError("frames must cover every UE exactly once")

    if method == "fd":
        X = np.fft.fft(np.stack([f.payload for f in frames]), axis=-1, norm="ortho")
        Y = np.einsum("mkn,kn->mn", ch.freq[:, order, :], X)
        return np.fft.ifft(Y, axis=-1, norm="ortho")
    if method == "linear":
        y = np.zeros((ch.M, N), dtype=complex)
        for f in frames:
            tx = f.transmitted
            for m in range(ch.M):
                y[m] += np.convolve(tx, ch.taps[m, f.ue])[f.n_cp: f.n_cp + N]
        return y
    raise ValueError(f"unknown propagation method {method!r}")


def add_noise(y, noise: NoiseModel, seed=None) -> np.ndarray:
    y = np.asarray(y)
    if noise.variance == 0:
        return y.copy()
    rng = as_generator(seed)
    return y + complex_normal(rng, y.shape, noise.variance)
