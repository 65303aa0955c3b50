"""
Frequency-domain MRC-MMSE detection of single- and multi-stream uplink frames.

After despreading, bin ``n`` of a length-``N/L`` symbol spectrum shows up in
the ``L`` aliased bins ``n + r*N/L``. Stacking those bins over all antennas
gives an ``ML``-row observation (the "virtual antennas") which is solved with
one regularized least-squares problem per base bin ``n = 0 .. N/L - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla

from .channel import ChannelSet
from .waveform import SpreadingOperator, StreamAllocation

__all__ = [
    "DegenerateSystemError",
    "DetectorConfig",
    "CompositeChannelMatrix",
    "CompositeSystem",
    "MMSEEstimate",
    "DetectedFrame",
    "alias_bins",
    "fd_despread",
    "assemble_composite",
    "assemble_A",
    "assemble_B",
    "prepare_system",
    "regularized_solve",
    "mmse_detect_single",
    "mmse_detect_multi",
    "demap_to_time",
    "detect_frame",
]

PINV_RCOND = 1e-12
UNBIAS_POLICIES = ("diagonal", "scalar", "none")


class DegenerateSystemError(ValueError):
    """Noiseless system whose composite matrix has too few independent columns."""


@dataclass(frozen=True)
class DetectorConfig:
    noise_var: float
    unbias: str = "diagonal"
    mode: str = "single"

    def __post_init__(self):
        if self.noise_var < 0:
            raise ValueError(f"noise_var must be >= 0, got {self.noise_var}")
        if self.unbias not in UNBIAS_POLICIES:
            raise ValueError(f"unbias must be one of {UNBIAS_POLICIES}, got {self.unbias!r}")
        if self.mode not in ("single", "multi"):
            raise ValueError(f"mode must be 'single' or 'multi', got {self.mode!r}")


@dataclass(frozen=True)
class CompositeChannelMatrix:
    """Stacked per-bin channel matrix.

    ``matrix`` has shape ``(..., M*L, n_cols)``; rows are ordered alias-major
    (block ``r`` holds bin ``n + r*N/L``), antennas in order inside a block.
    ``columns`` maps each column to ``(ue, stream)``.
    """

    n: np.ndarray
    matrix: np.ndarray
    columns: tuple[tuple[int, int], ...]
    kind: str
    L: int


class MMSEEstimate(NamedTuple):
    estimate: np.ndarray
    bias: np.ndarray


@dataclass(frozen=True)
class CompositeSystem:
    """Everything about the detector that depends only on the channel."""

    composite: CompositeChannelMatrix
    gram: np.ndarray
    mode: str
    L: int

    @property
    def columns(self):
        return self.composite.columns


@dataclass
class DetectedFrame:
    """Time-domain estimates, one row per virtual user.

    ``symbols`` has shape ``(K_v, N/L)``; ``bias`` and ``residual`` are per-bin
    diagnostics with shapes ``(N/L, K_v)`` and ``(N/L,)``.
    """

    symbols: np.ndarray
    columns: tuple[tuple[int, int], ...]
    bias: np.ndarray | None = None
    residual: np.ndarray | None = None

    def stream(self, ue: int, stream: int = 0) -> np.ndarray:
        return self.symbols[self.columns.index((ue, stream))]


def alias_bins(N: int, L: int, n) -> np.ndarray:
    """Bins ``n + r*N/L`` for ``r = 0 .. L-1``, shape ``(..., L)``."""
    n = np.asarray(n)
    nb = N // L
    if np.any(n < 0) or np.any(n >= nb):
        raise ValueError(f"bin index must be in [0, {nb}), got {n}")
    return n[..., None] + nb * np.arange(L)


def fd_despread(y, Z: SpreadingOperator) -> np.ndarray:
    """Unitary DFT of the received samples followed by ``conj(fd_diag)``."""
    y = np.asarray(y)
    if y.shape[-1] != Z.N:
        raise ValueError(f"received length {y.shape[-1]} != N={Z.N}")
    return np.conj(Z.fd_diag) * np.fft.fft(y, axis=-1, norm="ortho")


def assemble_composite(y_fd, n, L: int) -> np.ndarray:
    """Composite received vector(s) for base bin(s) ``n``, shape ``(..., M*L)``.

    ``y_fd`` is the ``(M, N)`` despread spectrum of all antennas.
    """
    y_fd = np.atleast_2d(y_fd)
    M, N = y_fd.shape
    bins = alias_bins(N, L, n)
    stacked = y_fd[:, bins]                        # (M, ..., L)
    stacked = np.moveaxis(stacked, 0, -1)           # (..., L, M)
    return stacked.reshape(stacked.shape[:-2] + (L * M,))


def assemble_A(ch: ChannelSet, n, L: int) -> CompositeChannelMatrix:
    """Single-stream composite matrix: per-bin ``M x K`` channel matrices of
    the ``L`` aliased bins stacked on top of each other (no 1/sqrt(L))."""
    n = np.asarray(n)
    bins = alias_bins(ch.N, L, n)
    lam = ch.freq[:, :, bins]                       # (M, K, ..., L)
    lam = np.moveaxis(lam, (0, 1), (-2, -1))        # (..., L, M, K)
    matrix = lam.reshape(lam.shape[:-3] + (L * ch.M, ch.K))
    columns = tuple((k, 0) for k in range(ch.K))
    return CompositeChannelMatrix(n, matrix, columns, "A", L)


def assemble_B(ch: ChannelSet, alloc: StreamAllocation, n) -> CompositeChannelMatrix:
    """Multi-stream composite matrix with the 1/sqrt(L) factor folded in.

    Column ``(k, l)`` in block row ``r`` is
    ``exp(-2j*pi*shift_l*bin/N) * lambda[:, k, bin] / sqrt(L)``, ``bin = n + r*N/L``.
    """
    if alloc.K != ch.K:
        raise ValueError(f"allocation has {alloc.K} UEs, channel has {ch.K}")
    L = alloc.L
    alloc.check_antennas(ch.M)
    n = np.asarray(n)
    bins = alias_bins(ch.N, L, n)                   # (..., L)
    ues = np.array([k for k, _ in alloc.columns])
    lam = ch.freq[:, ues][:, :, bins]               # (M, K_v, ..., L)
    lam = np.moveaxis(lam, (0, 1), (-2, -1))        # (..., L, M, K_v)
    ramp = np.exp(-2j * np.pi * np.multiply.outer(bins, alloc.column_shifts) / ch.N)
    matrix = lam * ramp[..., :, None, :] / np.sqrt(L)
    matrix = matrix.reshape(matrix.shape[:-3] + (L * ch.M, alloc.K_v))
    return CompositeChannelMatrix(n, matrix, tuple(alloc.columns), "B", L)


def prepare_system(ch: ChannelSet, alloc: StreamAllocation, mode: str = "single") -> CompositeSystem:
    """Composite matrices and Gram matrices for all ``N/L`` base bins."""
    nb = ch.N // alloc.L
    bins = np.arange(nb)
    if mode == "single":
        if not alloc.single_stream or any(row != (0,) for row in alloc.shifts):
            raise ValueError("single-stream mode needs L_k = 1 and zero shift for every UE")
        if alloc.K >= ch.M * alloc.L:
            raise ValueError(f"K ({alloc.K}) must be < ML ({ch.M * alloc.L})")
        comp = assemble_A(ch, bins, alloc.L)
    elif mode == "multi":
        comp = assemble_B(ch, alloc, bins)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    G = comp.matrix
    gram = np.matmul(G.conj().swapaxes(-1, -2), G)
    return CompositeSystem(comp, gram, mode, alloc.L)


def regularized_solve(G, y, reg: float, gram=None) -> MMSEEstimate:
    """``(G^H G + reg I)^{-1} G^H y`` per leading index, via Cholesky.

    Returns the raw (biased) estimate together with the diagonal of
    ``(G^H G + reg I)^{-1} G^H G``. With ``reg == 0`` the pseudoinverse is used.
    """
    G = np.asarray(G)
    y = np.asarray(y)
    batch = G.shape[:-2]
    R, C = G.shape[-2:]
    if y.shape != batch + (R,):
        raise ValueError(f"observation shape {y.shape} does not match matrix {G.shape}")
    Gf = G.reshape((-1, R, C))
    yf = y.reshape((-1, R))
    est = np.empty((Gf.shape[0], C), dtype=complex)
    bias = np.ones((Gf.shape[0], C))

    if reg == 0:
        for b in range(Gf.shape[0]):
            U, sv, Vh = np.linalg.svd(Gf[b], full_matrices=False)
            keep = sv > PINV_RCOND * sv[0] if sv.size else sv.astype(bool)
            rank = int(keep.sum())
            if rank < C:
                raise DegenerateSystemError(
                    f"noiseless detection needs rank {C}, composite matrix has rank {rank}")
            est[b] = Vh.conj().T @ ((U.conj().T @ yf[b]) / sv)
        return MMSEEstimate(est.reshape(batch + (C,)), bias.reshape(batch + (C,)))

    if gram is None:
        gram = np.matmul(Gf.conj().swapaxes(-1, -2), Gf)
    gram = np.asarray(gram).reshape((-1, C, C))
    rhs = np.einsum("brc,br->bc", Gf.conj(), yf)
    eye = np.eye(C)
    for b in range(Gf.shape[0]):
        factor = sla.cho_factor(gram[b] + reg * eye, lower=True, check_finite=False)
        inv = sla.cho_solve(factor, eye, check_finite=False)
        est[b] = inv @ rhs[b]
        # (G^H G + cI)^{-1} G^H G = I - c (G^H G + cI)^{-1}
        bias[b] = 1.0 - reg * inv.diagonal().real
    return MMSEEstimate(est.reshape(batch + (C,)), bias.reshape(batch + (C,)))


def _unbias(result: MMSEEstimate, policy: str) -> MMSEEstimate:
    if policy == "none":
        return result
    if policy == "diagonal":
        return MMSEEstimate(result.estimate / result.bias, result.bias)
    alpha = result.bias.mean(axis=-1, keepdims=True)
    return MMSEEstimate(result.estimate / alpha, np.broadcast_to(alpha, result.bias.shape))


def _split(comp, L=None):
    if isinstance(comp, CompositeChannelMatrix):
        return comp.matrix, comp.L
    return np.asarray(comp), L


def mmse_detect_single(ybar, Abar, cfg: DetectorConfig, L: int | None = None,
                       gram=None) -> MMSEEstimate:
    """Single-stream detector on the unscaled stacked matrix from :func:`assemble_A`.

    Computes ``sqrt(L) (A^H A + L s2 I)^{-1} A^H y`` and unbiases the result.
    ``L`` is taken from ``Abar`` when it is a :class:`CompositeChannelMatrix`.
    """
    A, L = _split(Abar, L)
    if L is None:
        raise TypeError("L is required when Abar is a plain array")
    raw = regularized_solve(A, ybar, L * cfg.noise_var, gram)
    return _unbias(MMSEEstimate(np.sqrt(L) * raw.estimate, raw.bias), cfg.unbias)


def mmse_detect_multi(ybar, Bbar, cfg: DetectorConfig, gram=None) -> MMSEEstimate:
    """Multi-stream detector ``(B^H B + s2 I)^{-1} B^H y`` followed by unbiasing.

    ``Bbar`` already carries the 1/sqrt(L) factor, so no extra scaling is applied.
    """
    B, _ = _split(Bbar)
    return _unbias(regularized_solve(B, ybar, cfg.noise_var, gram), cfg.unbias)


def demap_to_time(estimates, columns: Sequence[tuple[int, int]], n_bins: int | None = None,
                  bias=None, residual=None) -> DetectedFrame:
    """Regroup per-bin estimates by virtual user and return to the time domain.

    ``estimates`` is either an ``(N/L, K_v)`` array or a mapping ``bin -> vector``.
    """
    columns = tuple(columns)
    if isinstance(estimates, Mapping):
        if n_bins is None:
            n_bins = len(estimates)
        missing = [n for n in range(n_bins) if n not in estimates]
        if missing:
            raise ValueError(f"estimates missing for bins {missing[:8]}")
        est = np.stack([np.asarray(estimates[n]) for n in range(n_bins)])
    else:
        est = np.asarray(estimates)
        if n_bins is not None and est.shape[0] != n_bins:
            raise ValueError(f"expected {n_bins} bins, got {est.shape[0]}")
    if est.ndim != 2 or est.shape[1] != len(columns):
        raise ValueError(f"estimate array shape {est.shape} does not match {len(columns)} columns")
    if not np.all(np.isfinite(est)):
        raise ValueError("estimates contain missing (non-finite) bins")
    symbols = np.fft.ifft(est.T, axis=-1, norm="ortho")
    return DetectedFrame(symbols, columns, bias, residual)


def detect_frame(received, ch: ChannelSet, alloc: StreamAllocation, Z: SpreadingOperator,
                 cfg: DetectorConfig, system: CompositeSystem | None = None) -> DetectedFrame:
    """Despread, stack, detect every base bin and return time-domain estimates.

    ``received`` holds the CP-free samples of all antennas, shape ``(M, N)``.
    A precomputed ``system`` (see :func:`prepare_system`) may be passed to
    reuse the channel-only work across noise levels.
    """
    received = np.atleast_2d(received)
    if received.shape != (ch.M, ch.N):
        raise ValueError(f"received shape {received.shape} != (M, N) = {(ch.M, ch.N)}")
    if ch.N % alloc.L:
        raise ValueError(f"N={ch.N} not divisible by L={alloc.L}")
    if system is None:
        system = prepare_system(ch, alloc, cfg.mode)
    elif system.mode != cfg.mode:
        raise ValueError(f"prepared system is {system.mode}-stream, config asks for {cfg.mode}")
    L = alloc.L
    nb = ch.N // L
    y_fd = fd_despread(received, Z)
    ybar = assemble_composite(y_fd, np.arange(nb), L)
    G = system.composite.matrix
    if cfg.mode == "single":
        raw = regularized_solve(G, ybar, L * cfg.noise_var, system.gram)
        raw = MMSEEstimate(np.sqrt(L) * raw.estimate, raw.bias)
        model = G / np.sqrt(L)
    else:
        raw = regularized_solve(G, ybar, cfg.noise_var, system.gram)
        model = G
    resid = ybar - np.einsum("brc,bc->br", model, raw.estimate)
    residual = np.sum(np.abs(resid) ** 2, axis=-1)
    result = _unbias(raw, cfg.unbias)
    return demap_to_time(result.estimate, system.columns, nb, result.bias, residual)
