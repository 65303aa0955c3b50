"""Dense time-domain reference detector for small frames.

Builds the full ``MN x K_v(N/L)`` system matrix out of explicit circulant
channel matrices, the dense spreading matrix and shifted expander matrices,
then solves the MMSE problem directly. Nothing here goes through the
per-bin frequency-domain path, so it is an independent check on it.
"""

from __future__ import annotations

import numpy as np

from .channel import ChannelSet
from .waveform import SpreadingOperator, StreamAllocation

__all__ = ["expander_matrix", "system_matrix", "dense_mmse"]


def expander_matrix(N: int, L: int, shift: int = 0) -> np.ndarray:
    """N x N/L upsampler with its ones moved down by ``shift`` rows."""
    E = np.zeros((N, N // L))
    E[shift::L, :] = np.eye(N // L)
    return E


def system_matrix(ch: ChannelSet, alloc: StreamAllocation, Z: SpreadingOperator) -> np.ndarray:
    N, L = ch.N, alloc.L
    Zd = Z.matrix()
    nb = N // L
    Phi = np.zeros((ch.M * N, alloc.K_v * nb), dtype=complex)
    for j, ((k, _), shift) in enumerate(zip(alloc.columns, alloc.column_shifts)):
        ZE = Zd @ expander_matrix(N, L, shift)
        for m in range(ch.M):
            Phi[m * N:(m + 1) * N, j * nb:(j + 1) * nb] = ch.circulant(m, k) @ ZE
    return Phi


def dense_mmse(received, ch: ChannelSet, alloc: StreamAllocation, Z: SpreadingOperator,
               noise_var: float, unbias: str = "none") -> np.ndarray:
    """MMSE estimate of all symbols, shape ``(K_v, N/L)``.

    ``unbias="diagonal"`` divides by the diagonal of the estimator's gain
    matrix expressed in the per-stream unitary-DFT basis, which is what the
    frequency-domain detector does bin by bin.
    """
    Phi = system_matrix(ch, alloc, Z)
    y = np.asarray(received).reshape(-1)
    nb = ch.N // alloc.L
    cols = Phi.shape[1]
    if noise_var == 0:
        est = np.linalg.lstsq(Phi, y, rcond=None)[0]
        return est.reshape(alloc.K_v, nb)
    gram = Phi.conj().T @ Phi
    W = np.linalg.solve(gram + noise_var * np.eye(cols), Phi.conj().T)
    est = W @ y
    if unbias == "none":
        return est.reshape(alloc.K_v, nb)
    if unbias != "diagonal":
        raise ValueError(f"unsupported unbias policy {unbias!r}")
    F = np.fft.fft(np.eye(nb), norm="ortho")
    U = np.kron(np.eye(alloc.K_v), F)
    gain_fd = U @ (W @ Phi) @ U.conj().T
    est_fd = (U @ est) / np.real(np.diag(gain_fd))
    return (U.conj().T @ est_fd).reshape(alloc.K_v, nb)
