import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from freqcounter.counter import to_frequency_reciprocal
from freqcounter.resample import (
    CicConfig,
    EventTriggeredSampler,
    SignalLostError,
    ZohCicResampler,
    cic_decimate,
    event_triggered_resample,
    zoh_cic_decimate,
    zoh_upsample,
)
from freqcounter.series import FrequencySeries, TimestampSeries, UniformSeries

F_CLK = 76.92e6


# -- zero-order hold ----------------------------------------------------------


def test_hold_single_event_over_one_microsecond():
    out = zoh_upsample(np.array([0.0]), F_CLK, t_end=1e-6, values=np.array([5.0]))
    assert out.values.size == 77
    assert np.all(out.values == 5.0)
    assert out.rate == F_CLK


def test_hold_step_sequence():
    f = 10.0
    out = zoh_upsample(np.array([0.0, 0.3]), f, t_end=0.6, values=np.array([1.0, 2.0]))
    assert out.values.tolist() == [1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]


def test_hold_rejects_empty():
    with pytest.raises(ValueError):
        zoh_upsample(np.array([]), F_CLK, values=np.array([]))


def test_hold_images_at_event_rate_multiples():
    # events at 1 kHz on a 64 kHz clock carrying a 50 Hz tone: the held
    # stream has images at n * 1 kHz +- 50 Hz with sinc envelope
    f_clk, f_ev, f_tone = 64e3, 1e3, 50.0
    t_ev = np.arange(1000) / f_ev
    out = zoh_upsample(t_ev, f_clk, t_end=1.0 - 0.5 / f_clk, values=np.sin(2 * np.pi * f_tone * t_ev))
    x = out.values
    assert x.size == 64000
    spec = np.abs(np.fft.rfft(x)) / x.size * 2
    freqs = np.fft.rfftfreq(x.size, 1 / f_clk)
    for n in (1, 2, 3):
        for f in (n * f_ev - f_tone, n * f_ev + f_tone):
            i = int(round(f / (freqs[1] - freqs[0])))
            expected = abs(np.sinc(f / f_ev))
            assert spec[i] == pytest.approx(expected, rel=0.02)
    # away from the images there is no energy
    quiet = int(round(500.0 / (freqs[1] - freqs[0])))
    assert spec[quiet] < 1e-10


# -- CIC -------------------------------------------------------------------


def test_cic_output_rate():
    cfg = CicConfig(R=8192, N=2, f_clk=F_CLK)
    assert cfg.output_rate == F_CLK / 8192
    assert cfg.output_rate == pytest.approx(9389.65, abs=0.01)
    assert round(cfg.output_rate / 1e3, 1) == 9.4


def test_cic_constant_input_is_unity():
    cfg = CicConfig(R=16, N=2, f_clk=1e3)
    out = cic_decimate(UniformSeries(1e3, np.full(1000, 2.5)), cfg, drop_transient=True)
    np.testing.assert_allclose(out.values, 2.5, rtol=1e-15)
    out_int = cic_decimate(UniformSeries(1e3, np.full(1000, 7, dtype=np.int64)), cfg, drop_transient=True)
    np.testing.assert_array_equal(out_int.values, 7.0)


def test_cic_impulse_response_is_triangle():
    R, N = 8, 3
    L = R * N
    cfg = CicConfig(R=1, N=L, f_clk=1.0)  # R=1 exposes the full-rate response
    x = np.zeros(4 * L, dtype=np.int64)
    x[0] = 1
    h = cic_decimate(UniformSeries(1.0, x), cfg).values * cfg.dc_gain
    tri = np.convolve(np.ones(L), np.ones(L))
    np.testing.assert_array_equal(h[: 2 * L - 1], tri)
    assert np.all(h[2 * L - 1 :] == 0)
    assert h.sum() == L**2
    # decimated response: every R-th sample of the triangle, for an impulse
    # aligned with the first output instant
    cfg_r = CicConfig(R=R, N=N, f_clk=1.0)
    hd = cic_decimate(UniformSeries(1.0, np.roll(x, R - 1)), cfg_r).values * cfg_r.dc_gain
    np.testing.assert_array_equal(hd[: tri[::R].size], tri[::R])


def test_cic_rate_mismatch_and_bad_config():
    with pytest.raises(ValueError, match="does not match"):
        cic_decimate(UniformSeries(1e3, np.ones(100)), CicConfig(R=4, f_clk=2e3))
    with pytest.raises(ValueError):
        CicConfig(R=0)
    with pytest.raises(ValueError):
        CicConfig(order=3)


def test_cic_tail_dropped():
    out = cic_decimate(UniformSeries(1e3, np.ones(103)), CicConfig(R=10, N=1, f_clk=1e3))
    assert out.values.size == 10


def test_cic_integer_overflow_detected():
    cfg = CicConfig(R=8192, N=2, f_clk=F_CLK)
    big = np.full(10, 2**40, dtype=np.int64)
    with pytest.raises(OverflowError):
        cic_decimate(UniformSeries(F_CLK, big), cfg)


def test_cic_integer_wraparound_is_exact():
    # intermediate sums wrap in int64 but the comb output is still exact
    cfg = CicConfig(R=64, N=2, f_clk=1.0)
    rng = np.random.default_rng(0)
    x = rng.integers(-(2**40), 2**40, 200000)
    out = cic_decimate(UniformSeries(1.0, x), cfg, drop_transient=True).values * cfg.dc_gain
    ref = np.convolve(np.convolve(x.astype(object), [1] * 128), [1] * 128)[63::64][4 : 4 + out.size]
    assert [int(v) for v in out[:50]] == [int(v) for v in ref[:50]]


def test_cic_magnitude_formula():
    cfg = CicConfig(R=8192, N=2, f_clk=F_CLK)
    assert cfg.magnitude(0.0) == 1.0
    null = F_CLK / (cfg.R * cfg.N)
    assert cfg.magnitude(null) < 1e-20


@settings(max_examples=25, deadline=None)
@given(
    gaps=st.lists(st.integers(1, 40), min_size=5, max_size=60),
    vals=st.lists(st.floats(-100, 100, allow_nan=False), min_size=60, max_size=60),
    R=st.integers(1, 6),
    N=st.integers(1, 3),
    offset=st.floats(0.05, 0.95),
)
def test_zoh_cic_equals_materialized_chain(gaps, vals, R, N, offset):
    f_clk = 1000.0
    ticks = np.cumsum(gaps)
    times = (ticks - offset) / f_clk  # events between clock edges
    values = np.array(vals[: ticks.size])
    cfg = CicConfig(R=R, N=N, f_clk=f_clk)
    held = zoh_upsample(times, f_clk, values=values)
    ref = cic_decimate(held, cfg, drop_transient=True)
    fast = zoh_cic_decimate(times, cfg, values=values)
    assert fast.values.size == ref.values.size
    np.testing.assert_allclose(fast.values, ref.values, rtol=1e-9, atol=1e-9)
    if ref.values.size:
        assert fast.t0 == pytest.approx(ref.t0, abs=1e-12)


def test_zoh_cic_constant_stream_is_identity(default_stamps):
    out = zoh_cic_decimate(default_stamps, CicConfig(), values=np.full(len(default_stamps), 119e3))
    np.testing.assert_allclose(out.values, 119e3, rtol=1e-14)


# -- event-triggered ----------------------------------------------------------


def _stamps(f, seconds):
    n = int(seconds * f)
    return TimestampSeries(np.arange(1, n + 1) / f)


def test_event_triggered_sampling_error_is_uniform():
    f = 119e3 * math.sqrt(2) / 1.4  # irrational ratio to the trigger grid
    ts = _stamps(f, 1.0)
    out = event_triggered_resample(ts, 100e-6)
    err = out.sampling_error
    assert np.all(err >= 0) and np.all(err < 1 / f)
    assert stats.kstest(err * f, "uniform").pvalue > 0.01
    assert np.mean(np.diff(out.sample_times) * f) == pytest.approx(f * 100e-6, rel=1e-3)


def test_event_triggered_noiseless_values():
    ts = _stamps(119e3 * math.sqrt(2) / 1.4, 0.1)
    out = event_triggered_resample(ts, 100e-6)
    np.testing.assert_allclose(out.values, 119e3 * math.sqrt(2) / 1.4, rtol=1e-9)
    with_k = event_triggered_resample(ts, 100e-6, k=11)
    np.testing.assert_allclose(with_k.values, 119e3 * math.sqrt(2) / 1.4, rtol=1e-9)


def test_event_triggered_exact_edge_has_zero_error():
    ts = TimestampSeries(np.arange(1, 1001) * 1e-5)  # 100 kHz, edges on the trigger grid
    out = event_triggered_resample(ts, 1e-4)
    assert np.max(np.abs(out.sampling_error)) < 1e-15


def test_event_triggered_signal_lost():
    t = np.concatenate([np.arange(1, 20001) * 1e-5, 0.5 + np.arange(1, 20001) * 1e-5])
    with pytest.raises(SignalLostError):
        event_triggered_resample(TimestampSeries(t), 1e-4)


def test_event_triggered_interval_too_short():
    with pytest.raises(ValueError, match="shorter"):
        event_triggered_resample(_stamps(1e3, 1.0), 1e-4)


def test_resampler_estimators(default_stamps):
    freq = to_frequency_reciprocal(default_stamps, 1)
    out = ZohCicResampler().fit_transform(freq)
    ref = zoh_cic_decimate(freq, CicConfig())
    np.testing.assert_array_equal(out.values, ref.values)
    ev = EventTriggeredSampler(T_int=100e-6).fit_transform(default_stamps)
    assert isinstance(ev, FrequencySeries)
    assert ZohCicResampler(R=1024).get_params()["R"] == 1024
