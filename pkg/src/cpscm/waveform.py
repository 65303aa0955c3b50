"""
Uplink transmit-side signal synthesis for cyclic-prefixed single-carrier frames.

Each UE maps bits to unit-variance symbols, places every length-``N/L`` symbol
stream on an ``L``-fold comb (optionally cyclically shifted), sums its streams,
spreads the result with a unitary circulant Zadoff-Chu operator and prepends a
cyclic prefix.

Transform conventions used throughout the package: time/frequency conversion
of *signals* uses the unitary DFT (``norm="ortho"``), while the frequency
diagonals of circulant *operators* (spreading, channels) are plain DFTs of
their first column.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Sequence

import numpy as np

__all__ = [
    "QPSK_GRAY",
    "StreamAllocation",
    "SymbolStream",
    "SpreadingOperator",
    "UplinkFrame",
    "map_symbols",
    "random_streams",
    "build_spreading",
    "expand_and_shift",
    "assemble_frame",
    "add_cp",
    "remove_cp",
]

# Indexed by 2*b0 + b1. Adjacent points differ in exactly one bit.
QPSK_GRAY = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


@dataclass(frozen=True)
class StreamAllocation:
    """Per-UE stream counts and the cyclic shift used by each stream.

    Parameters
    ----------
    L : int
        Comb factor, i.e. the maximum number of streams a UE may use.
    streams_per_ue : sequence of int
        ``L_k`` for every UE, each in ``[1, L]``.
    shifts : sequence of sequence of int, optional
        Cyclic shift of every stream. Defaults to ``0, 1, ..., L_k - 1``.
    """

    L: int
    streams_per_ue: tuple[int, ...]
    shifts: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        streams = tuple(int(n) for n in self.streams_per_ue)
        object.__setattr__(self, "streams_per_ue", streams)
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if not streams:
            raise ValueError("allocation needs at least one UE")
        for k, n in enumerate(streams):
            if not 1 <= n <= self.L:
                raise ValueError(f"UE {k}: L_k={n} outside [1, {self.L}]")
        if not self.shifts:
            shifts = tuple(tuple(range(n)) for n in streams)
        else:
            shifts = tuple(tuple(int(s) for s in row) for row in self.shifts)
        if len(shifts) != len(streams):
            raise ValueError("shifts must list one entry per UE")
        for k, (n, row) in enumerate(zip(streams, shifts)):
            if len(row) != n:
                raise ValueError(f"UE {k}: {len(row)} shifts given for L_k={n}")
            if len(set(row)) != len(row):
                raise ValueError(f"UE {k}: duplicate shifts {row}")
            if any(not 0 <= s < self.L for s in row):
                raise ValueError(f"UE {k}: shift outside [0, {self.L - 1}]")
        object.__setattr__(self, "shifts", shifts)

    @classmethod
    def uniform(cls, K: int, L: int, streams: int = 1) -> "StreamAllocation":
        return cls(L, (streams,) * K)

    @property
    def K(self) -> int:
        return len(self.streams_per_ue)

    @property
    def K_v(self) -> int:
        """Number of virtual users (total streams over all UEs)."""
        return sum(self.streams_per_ue)

    @property
    def columns(self) -> list[tuple[int, int]]:
        """``(ue, stream)`` for every virtual user, UE-major."""
        return [(k, l) for k, n in enumerate(self.streams_per_ue) for l in range(n)]

    @property
    def column_shifts(self) -> np.ndarray:
        return np.array([s for row in self.shifts for s in row], dtype=int)

    @property
    def single_stream(self) -> bool:
        return all(n == 1 for n in self.streams_per_ue)

    def check_antennas(self, M: int) -> None:
        if self.K_v >= M * self.L:
            raise ValueError(f"K_v ({self.K_v}) must be < ML ({M * self.L})")

    def profile(self) -> str:
        """Compact text form of the ``L_k`` list, e.g. ``"2x32"``."""
        values = self.streams_per_ue
        if len(set(values)) == 1:
            return f"{values[0]}x{len(values)}"
        return "|".join(str(v) for v in values)


@dataclass(frozen=True)
class SymbolStream:
    ue: int
    stream: int
    symbols: np.ndarray


@dataclass(frozen=True)
class SpreadingOperator:
    """Unitary circulant spreading matrix kept as its first column and
    frequency diagonal."""

    base: np.ndarray
    fd_diag: np.ndarray

    @property
    def N(self) -> int:
        return self.base.size

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Multiply ``x`` (last axis of length N) by the circulant matrix."""
        return np.fft.ifft(np.fft.fft(x, axis=-1) * self.fd_diag, axis=-1)

    def matrix(self) -> np.ndarray:
        """Dense N x N form. Only meant for small-N checks."""
        idx = (np.arange(self.N)[:, None] - np.arange(self.N)[None, :]) % self.N
        return self.base[idx]


@dataclass(frozen=True)
class UplinkFrame:
    ue: int
    payload: np.ndarray
    n_cp: int

    @property
    def transmitted(self) -> np.ndarray:
        return add_cp(self.payload, self.n_cp)


def map_symbols(bits, count: int, alphabet: str = "qpsk") -> np.ndarray:
    """Gray-mapped unit-variance QPSK.

    ``bits`` are consumed in pairs, first bit selects the sign of the real
    part: ``00 -> (1+j)/sqrt(2)``, ``11 -> (-1-j)/sqrt(2)``.
    """
    if alphabet != "qpsk":
        raise ValueError(f"unsupported alphabet {alphabet!r}")
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.size != 2 * count:
        raise ValueError(f"expected {2 * count} bits for {count} QPSK symbols, got {bits.size}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    pairs = bits.reshape(count, 2)
    return QPSK_GRAY[2 * pairs[:, 0] + pairs[:, 1]]


def random_streams(alloc: StreamAllocation, N: int, rng: np.random.Generator,
                   alphabet: str = "qpsk") -> list[list[SymbolStream]]:
    """Draw random payload streams for every UE of an allocation."""
    n_sym = N // alloc.L
    bits = rng.integers(0, 2, size=(alloc.K_v, 2 * n_sym))
    out: list[list[SymbolStream]] = [[] for _ in range(alloc.K)]
    for row, (k, l) in zip(bits, alloc.columns):
        out[k].append(SymbolStream(k, l, map_symbols(row, n_sym, alphabet)))
    return out


def build_spreading(N: int, root: int = 1) -> SpreadingOperator:
    """Zadoff-Chu spreading operator of length N.

    ``root = 0`` gives the identity operator, which is handy for tests.
    """
    if N < 2:
        raise ValueError(f"N must be >= 2, got {N}")
    if root == 0:
        base = np.zeros(N, dtype=complex)
        base[0] = 1.0
        return SpreadingOperator(base, np.ones(N, dtype=complex))
    if gcd(root, N) != 1:
        raise ValueError(f"ZC root {root} is not coprime with N={N}")
    n = np.arange(N, dtype=np.float64)
    if N % 2 == 0:
        phase = root * n * n / N
    else:
        phase = root * n * (n + 1) / N
    # reduce modulo 2 before exponentiating to keep large-N phases accurate
    base = np.exp(-1j * np.pi * np.mod(phase, 2.0)) / np.sqrt(N)
    return SpreadingOperator(base, np.fft.fft(base))


def expand_and_shift(s, L: int, shift: int = 0) -> np.ndarray:
    """Place ``s`` on every L-th sample starting at ``shift``."""
    s = np.asarray(s)
    if not 0 <= shift < L:
        raise ValueError(f"shift {shift} outside [0, {L - 1}]")
    out = np.zeros(s.size * L, dtype=complex)
    out[shift::L] = s
    return out


def assemble_frame(streams: Sequence[SymbolStream], alloc: StreamAllocation,
                   Z: SpreadingOperator, n_cp: int = 0, ue: int | None = None) -> UplinkFrame:
    """Build one UE's spread payload from its symbol streams."""
    if not streams:
        raise ValueError("no streams given")
    k = streams[0].ue if ue is None else ue
    if len(streams) != alloc.streams_per_ue[k]:
        raise ValueError(f"UE {k}: got {len(streams)} streams, allocation says "
                         f"{alloc.streams_per_ue[k]}")
    n_sym = Z.N // alloc.L
    if Z.N % alloc.L:
        raise ValueError(f"N={Z.N} is not divisible by L={alloc.L}")
    combined = np.zeros(Z.N, dtype=complex)
    for stream, shift in zip(streams, alloc.shifts[k]):
        if stream.symbols.size != n_sym:
            raise ValueError(f"stream {stream.stream} of UE {k} has "
                             f"{stream.symbols.size} symbols, expected {n_sym}")
        combined += expand_and_shift(stream.symbols, alloc.L, shift)
    return UplinkFrame(k, Z.apply(combined), n_cp)


def add_cp(x, n_cp: int) -> np.ndarray:
    x = np.asarray(x)
    if not 0 <= n_cp < x.shape[-1]:
        raise ValueError(f"CP length {n_cp} must be in [0, N) with N={x.shape[-1]}")
    if n_cp == 0:
        return x.copy()
    return np.concatenate([x[..., -n_cp:], x], axis=-1)


def remove_cp(y, n_cp: int) -> np.ndarray:
    y = np.asarray(y)
    if not 0 <= n_cp < y.shape[-1] - n_cp:
        raise ValueError(f"CP length {n_cp} too long for a {y.shape[-1]}-sample frame")
    return y[..., n_cp:]
