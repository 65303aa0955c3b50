import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpscm.channel import (ChannelSet, NoiseModel, PowerDelayProfile, add_noise, draw_channels,
                           propagate)
from cpscm.waveform import StreamAllocation, UplinkFrame, assemble_frame, build_spreading, random_streams


def frame(x, ue=0, n_cp=0):
    return UplinkFrame(ue, np.asarray(x, dtype=complex), n_cp)


# --- power delay profiles ------------------------------------------------------------------

def test_uniform_pdp():
    pdp = PowerDelayProfile.uniform(16)
    assert pdp.L_h == 16 and np.allclose(pdp.variances, 1 / 16)


def test_exponential_pdp_normalized_and_decaying():
    v = PowerDelayProfile.exponential(8, 2.0).variances
    assert v.sum() == pytest.approx(1.0)
    assert np.all(np.diff(v) < 0)


@pytest.mark.parametrize("v", [[0.5, 0.6], [-0.1, 1.1], []])
def test_pdp_rejects(v):
    with pytest.raises(ValueError):
        PowerDelayProfile(np.array(v))


def test_pdp_from_name_unknown():
    with pytest.raises(ValueError, match="unknown"):
        PowerDelayProfile.from_name("pedestrian", 4)


# --- channel draws -------------------------------------------------------------------------

def test_flat_channel_has_constant_response():
    ch = draw_channels(3, 2, PowerDelayProfile.uniform(1), 32, 7)
    assert np.allclose(ch.freq, ch.freq[..., :1], atol=1e-14)


def test_tap_variance_matches_profile():
    ch = draw_channels(64, 64, PowerDelayProfile.uniform(16), 64, 11)
    var = np.mean(np.abs(ch.taps) ** 2, axis=(0, 1))
    assert np.all(np.abs(var / (1 / 16) - 1) < 0.05)


def test_mean_frequency_gain_is_unity():
    ch = draw_channels(32, 32, PowerDelayProfile.uniform(16), 64, 12)
    assert np.mean(np.abs(ch.freq) ** 2) == pytest.approx(1.0, rel=0.05)


def test_draw_is_deterministic():
    a = draw_channels(2, 3, PowerDelayProfile.uniform(4), 16, 5)
    b = draw_channels(2, 3, PowerDelayProfile.uniform(4), 16, 5)
    assert np.array_equal(a.taps, b.taps)


def test_channel_arrays_are_read_only():
    ch = draw_channels(1, 1, PowerDelayProfile.uniform(2), 8, 0)
    with pytest.raises(ValueError):
        ch.taps[0, 0, 0] = 1.0


def test_frequency_response_parseval(rng):
    ch = draw_channels(2, 2, PowerDelayProfile.uniform(8), 64, rng)
    # plain DFT: sum |lambda|^2 = N * sum |h|^2
    assert np.allclose(np.sum(np.abs(ch.freq) ** 2, -1), 64 * np.sum(np.abs(ch.taps) ** 2, -1))


def test_circulant_columns_are_downward_shifts():
    ch = ChannelSet.from_taps(np.array([[[1, 2, 3]]]), 5)
    C = ch.circulant(0, 0)
    assert np.array_equal(C[:, 0], [1, 2, 3, 0, 0])
    for j in range(1, 5):
        assert np.array_equal(C[:, j], np.roll(C[:, 0], j))


def test_circulant_diagonalized_by_dft():
    ch = draw_channels(1, 1, PowerDelayProfile.uniform(4), 16, 3)
    F = np.fft.fft(np.eye(16), norm="ortho")
    D = F @ ch.circulant(0, 0) @ F.conj().T
    assert np.allclose(D, np.diag(ch.freq[0, 0]), atol=1e-12)


def test_taps_longer_than_n():
    with pytest.raises(ValueError, match="exceeds"):
        ChannelSet.from_taps(np.ones((1, 1, 9)), 8)


# --- propagation ---------------------------------------------------------------------------

def test_identity_channel_passes_through():
    ch = ChannelSet.from_taps(np.ones((1, 1, 1)), 8)
    x = np.arange(8) + 1j
    assert np.allclose(propagate([frame(x)], ch)[0], x)


def test_pure_delay_is_cyclic_roll():
    ch = ChannelSet.from_taps(np.array([[[0, 1]]]), 8)
    x = np.arange(8) + 0j
    assert np.allclose(propagate([frame(x, n_cp=1)], ch)[0], np.roll(x, 1))


def test_propagation_matches_dense_circulants(rng):
    N, M, K = 16, 2, 2
    ch = draw_channels(M, K, PowerDelayProfile.uniform(4), N, rng)
    xs = [rng.standard_normal(N) + 1j * rng.standard_normal(N) for _ in range(K)]
    y = propagate([frame(x, k, 3) for k, x in enumerate(xs)], ch)
    for m in range(M):
        ref = sum(ch.circulant(m, k) @ xs[k] for k in range(K))
        assert np.allclose(y[m], ref, atol=1e-12)


@given(N=st.sampled_from([8, 16, 32]), L_h=st.integers(1, 8), M=st.integers(1, 3),
       K=st.integers(1, 3), extra=st.integers(0, 4), seed=st.integers(0, 2**32 - 1))
def test_linear_convolution_matches_fd(N, L_h, M, K, extra, seed):
    r = np.random.default_rng(seed)
    ch = draw_channels(M, K, PowerDelayProfile.uniform(L_h), N, r)
    alloc = StreamAllocation(1, (1,) * K)
    Z = build_spreading(N, 1)
    frames = [assemble_frame(s, alloc, Z, min(L_h - 1 + extra, N - 1)) for s in random_streams(alloc, N, r)]
    assert np.allclose(propagate(frames, ch, "fd"), propagate(frames, ch, "linear"), atol=1e-10)


def test_short_cp_rejected():
    ch = ChannelSet.from_taps(np.ones((1, 1, 4)) / 2, 8)
    with pytest.raises(ValueError, match="shorter than channel memory"):
        propagate([frame(np.ones(8), n_cp=2)], ch)


def test_propagate_checks_frames():
    ch = ChannelSet.from_taps(np.ones((1, 2, 1)), 8)
    with pytest.raises(ValueError, match="frames for"):
        propagate([frame(np.ones(8))], ch)
    with pytest.raises(ValueError, match="exactly once"):
        propagate([frame(np.ones(8), 0), frame(np.ones(8), 0)], ch)


# --- noise ---------------------------------------------------------------------------------

def test_zero_noise_is_passthrough():
    y = np.arange(6) + 1j
    out = add_noise(y, NoiseModel(0.0), 1)
    assert np.array_equal(out, y) and out is not y


def test_noise_variance():
    w = add_noise(np.zeros(100_000, complex), NoiseModel(0.1), 3)
    assert np.mean(np.abs(w) ** 2) == pytest.approx(0.1, rel=0.02)
    assert np.var(w.real) == pytest.approx(0.05, rel=0.03)
    assert np.var(w.imag) == pytest.approx(0.05, rel=0.03)


def test_noise_is_seeded():
    a = add_noise(np.zeros(16, complex), NoiseModel(1.0), 9)
    b = add_noise(np.zeros(16, complex), NoiseModel(1.0), 9)
    assert np.array_equal(a, b)


def test_noise_model_db_round_trip():
    nm = NoiseModel.from_es_n0_db(20.0)
    assert nm.variance == pytest.approx(0.01)
    assert nm.es_n0_db == pytest.approx(20.0)
    with pytest.raises(ValueError):
        NoiseModel(-1.0)
