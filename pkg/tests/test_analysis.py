import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpscm.analysis import (CSV_FIELDS, GainAccumulator, GainCurve, GainPoint, TRACE_NOTE,
                            asymptotic_gain_multi, asymptotic_gain_single, composite_trace_check,
                            condition_study, curve_rows, db, frame_mse, measure_gain,
                            ofdm_baseline_gain, wishart_trace_mc)
from cpscm.channel import NoiseModel
from cpscm.config import parse_config
from cpscm.sim import run_curve


def small_config(**kw):
    base = dict(N=256, L=4, M=16, K=8, L_h=16, es_n0_db=(30,), trials=40, mode="scm-single")
    base.update(kw)
    return parse_config(base=base)


# --- closed forms --------------------------------------------------------------------------

def test_single_stream_asymptotes():
    assert [asymptotic_gain_single(64, k, 8) for k in (32, 64, 128)] == [60, 56, 48]


def test_multi_stream_asymptotes():
    assert [asymptotic_gain_multi(64, 8, (n,) * 32) for n in (2, 3, 4)] == [56, 52, 48]
    assert asymptotic_gain_multi(64, 4, (3,) * 32) == 40
    assert db(40) == pytest.approx(16.02, abs=0.005)
    assert db(64 - 32) == pytest.approx(15.05, abs=0.005)


def test_asymptote_rejects_overload():
    with pytest.raises(ValueError, match=r"K_v \(16\) must be < ML \(16\)"):
        asymptotic_gain_multi(4, 4, (4,) * 4)
    with pytest.raises(ValueError):
        asymptotic_gain_single(2, 4, 2)


# --- gain bookkeeping ----------------------------------------------------------------------

def test_measure_gain_unit_example():
    truth = np.ones((1, 4), complex)
    est = truth + np.array([[0.1, -0.1, 0.1j, -0.1j]])
    p = measure_gain([(est, truth)], NoiseModel(0.01))
    assert p.gain == pytest.approx(1.0)
    assert p.gain_db == pytest.approx(0.0, abs=1e-12)


def test_measure_gain_needs_frames():
    with pytest.raises(ValueError, match="at least one frame"):
        measure_gain([], NoiseModel(0.1))


def test_frame_mse_shape_check():
    with pytest.raises(ValueError, match="shape"):
        frame_mse(np.ones((2, 3)), np.ones((3, 2)))


def test_gain_point_rejects_nonpositive_mse():
    with pytest.raises(ValueError):
        GainPoint(10.0, 0.1, 0.0, 0.0, 1)


def test_accumulator_point_statistics():
    acc = GainAccumulator(0.1, 10.0)
    for m in (0.01, 0.02, 0.03):
        acc.add(m)
    p = acc.point(8.0)
    assert p.mse == pytest.approx(0.02)
    assert p.mse_stderr == pytest.approx(0.01 / math.sqrt(3))
    assert p.gain == pytest.approx(5.0)
    assert p.normalized_gain_db == pytest.approx(db(5 / 8))
    assert p.es_n0_db == 10.0


mse_lists = st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=12)


@given(a=mse_lists, b=mse_lists, c=mse_lists)
def test_accumulator_merge_is_associative(a, b, c):
    def acc(xs):
        out = GainAccumulator(0.5)
        for x in xs:
            out.add(x)
        return out

    left = acc(a).merge(acc(b)).merge(acc(c))
    right = acc(a).merge(acc(b).merge(acc(c)))
    flat = acc(a + b + c)
    for other in (right, flat):
        assert other.count == left.count
        assert other.mse_sum == pytest.approx(left.mse_sum, rel=1e-12)
        assert other.gain_sumsq == pytest.approx(left.gain_sumsq, rel=1e-12)


def test_accumulator_merge_rejects_other_noise_level():
    with pytest.raises(ValueError):
        GainAccumulator(0.1).merge(GainAccumulator(0.2))


def test_curve_requires_increasing_es_n0():
    pts = [GainPoint(10.0, 0.1, 0.01, 0.001, 5), GainPoint(5.0, 0.3, 0.03, 0.001, 5)]
    with pytest.raises(ValueError, match="strictly increasing"):
        GainCurve("scm-single", 4, 2, 2, "2x1", pts)


def test_monotonicity_allows_small_dips():
    pts = [GainPoint(0.0, 1.0, 0.1, 0.002, 10), GainPoint(10.0, 0.1, 0.0101, 0.0002, 10)]
    assert GainCurve("scm-single", 4, 2, 2, "2x1", pts).is_monotone()
    pts[1] = GainPoint(10.0, 0.1, 0.02, 0.0002, 10)
    assert not GainCurve("scm-single", 4, 2, 2, "2x1", pts).is_monotone()


def test_csv_rows_follow_schema():
    curve = GainCurve("scm-single", 16, 8, 4, "1x8",
                      [GainPoint(30.0, 1e-3, 7.1e-5, 1e-6, 20, 14.0)])
    rows = curve_rows(curve)
    assert tuple(rows[0]) == CSV_FIELDS
    assert rows[0]["asymptote_db"] == f"{db(14):.6f}"
    assert rows[0]["Lk_profile"] == "1x8" and rows[0]["trials"] == "20"


# --- measured gains ------------------------------------------------------------------------

def test_single_stream_gain_near_asymptote():
    p = run_curve(small_config()).points[-1]
    assert abs(p.gain_db - db(14)) < 0.5


def test_flat_single_antenna_user_gain_is_m_minus_one():
    cfg = parse_config(base=dict(N=8, L=1, M=8, K=1, L_h=1, es_n0_db=(30,), trials=4000))
    assert run_curve(cfg).points[0].gain == pytest.approx(7.0, rel=0.03)


def test_gain_exceeds_asymptote_at_low_snr():
    # at low Es/N0 the unbiased MMSE output approaches the matched filter (gain ~ M)
    curve = run_curve(small_config(es_n0_db=(-20, 30), trials=20))
    low, high = curve.points
    assert low.gain > 14.5
    assert high.gain == pytest.approx(14.0, rel=0.05)


# --- Wishart / trace statistics ------------------------------------------------------------

def test_wishart_trace_small():
    assert wishart_trace_mc(8, 4, 10_000, seed=1) == pytest.approx(1.0, rel=0.05)


def test_wishart_trace_single_column():
    assert wishart_trace_mc(8, 1, 20_000, seed=2) == pytest.approx(1 / 7, rel=0.05)


def test_wishart_requires_tall_matrix():
    with pytest.raises(ValueError, match="must exceed"):
        wishart_trace_mc(4, 4, 10)


@pytest.mark.parametrize("streams,expected", [(1, 1 / 3), (2, 1.0)])
def test_composite_trace_matches_wishart(streams, expected):
    chk = composite_trace_check(4, 4, 4, 16, 100, streams=streams, seed=3)
    assert chk.expected == pytest.approx(expected)
    assert chk.rel_error < 0.10
    assert chk.note == TRACE_NOTE


def test_composite_trace_flat_channel_negative_control():
    with pytest.warns(RuntimeWarning, match="correlated"):
        chk = composite_trace_check(4, 4, 4, 1, 200, streams=1, seed=4)
    assert chk.rel_error > 0.3


# --- conditioning --------------------------------------------------------------------------

def test_condition_study_property():
    rep = condition_study(16, 8, 4, 2, 100, seed=5).summary()
    assert rep["B"]["median"] < rep["A"]["median"]
    assert rep["trials"] == 100


def test_condition_numbers_at_least_one():
    rep = condition_study(4, 2, 2, 1, 20, seed=6)
    assert np.all(rep.cond_A >= 1) and np.all(rep.cond_B >= 1 - 1e-9)


def test_condition_study_L1_coincides():
    rep = condition_study(8, 4, 1, 1, 10, seed=7)
    assert np.allclose(rep.cond_A, rep.cond_B)


# --- OFDM baseline -------------------------------------------------------------------------

def test_ofdm_matches_single_stream_scm():
    ofdm = ofdm_baseline_gain(16, 8, 4, (30,), 40, seed=8).points[0]
    scm = run_curve(small_config()).points[0]
    assert abs(ofdm.gain_db - scm.gain_db) < 0.5


def test_ofdm_one_user_per_group():
    curve = ofdm_baseline_gain(8, 4, 4, (30,), 100, N=64, L_h=8, seed=9)
    assert curve.points[0].gain == pytest.approx(7.0, rel=0.05)


def test_ofdm_rejects_bad_grouping():
    with pytest.raises(ValueError, match="divisible"):
        ofdm_baseline_gain(16, 6, 4, (30,), 1)
    with pytest.raises(ValueError, match="must be < M"):
        ofdm_baseline_gain(2, 8, 4, (30,), 1)
