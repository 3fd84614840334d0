import numpy as np
import pytest

from freqcounter.counter import (
    GateDivider,
    IdealConverter,
    QuantizationError,
    ReciprocalConverter,
    StampQuantizer,
    divide,
    frequency_from_pairs,
    quantize,
    time_noise,
    to_frequency_ideal,
    to_frequency_reciprocal,
)
from freqcounter.series import TimestampSeries

F_O = 119e3
T_O = 1 / F_O


def uniform_stamps(n, alpha=None):
    t = np.arange(n) * T_O
    if alpha is not None:
        t = t - alpha
    return TimestampSeries(t)


# -- divide -----------------------------------------------------------------


def test_divide_identity_and_decimation():
    ts = TimestampSeries(np.arange(10.0))
    assert np.array_equal(divide(ts, 1).times, ts.times)
    out = divide(ts, 3)
    assert out.times.tolist() == [0.0, 3.0, 6.0, 9.0]
    assert out.k == 3
    assert divide(out, 2).k == 6


def test_divide_stamp_rate():
    out = divide(uniform_stamps(121 * 50 + 1), 121)
    assert out.mean_rate == pytest.approx(983.5, abs=0.05)


@pytest.mark.parametrize("k", [0, -2])
def test_divide_rejects_bad_k(k):
    with pytest.raises(ValueError):
        divide(TimestampSeries(np.arange(4.0)), k)


# -- quantize ---------------------------------------------------------------


def test_quantize_rounds_to_interpolator_grid():
    out = quantize(TimestampSeries([0.5, 1.00000000004]), interp_res=100e-12)
    assert out.times[1] == pytest.approx(1.0, abs=1e-15)
    assert out.interp_res == 100e-12


def test_quantize_zero_resolution_is_identity():
    ts = TimestampSeries(np.sort(np.random.default_rng(0).uniform(0, 1, 50)))
    assert np.array_equal(quantize(ts, interp_res=0.0).times, ts.times)


def test_quantize_grid_points_unchanged():
    res = 100e-12
    ts = TimestampSeries(np.array([3, 10, 11, 500]) * res)
    np.testing.assert_array_equal(quantize(ts, interp_res=res).times, ts.times)


def test_quantize_collision_pushes_one_step_and_cascade_errors():
    res = 1e-9
    out = quantize(TimestampSeries([1.0e-9, 1.2e-9, 5e-9]), f_clk=1e8, interp_res=res)
    np.testing.assert_allclose(out.times, [1e-9, 2e-9, 5e-9], rtol=1e-12)
    with pytest.raises(QuantizationError):
        quantize(TimestampSeries([1.0e-9, 1.1e-9, 1.2e-9, 1.3e-9]), f_clk=1e8, interp_res=res)


def test_quantize_resolution_must_not_exceed_clock():
    with pytest.raises(ValueError, match="clock period"):
        quantize(TimestampSeries([0.0, 1.0]), f_clk=1e9, interp_res=2e-9)


# -- conversion ---------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 7, 121])
def test_reciprocal_noiseless_is_exact(k):
    out = to_frequency_reciprocal(uniform_stamps(500), k)
    np.testing.assert_allclose(out.values, F_O, rtol=1e-9)
    assert out.values.size == 500 - k
    # divide then single-cycle conversion agrees for every k
    np.testing.assert_allclose(to_frequency_reciprocal(divide(uniform_stamps(500), k), 1).values, F_O, rtol=1e-9)


def test_reciprocal_direct_arithmetic():
    out = to_frequency_reciprocal(TimestampSeries([0.0, 1.0, 2.1]), 1)
    np.testing.assert_allclose(out.values, [1.0, 1 / 1.1])
    assert out.values[1] == pytest.approx(0.9091, abs=1e-4)


def test_reciprocal_and_ideal_on_a_single_phase_step():
    # alpha jumps by 0.1 T_o between two stamps, so z = 0.1
    alpha = np.array([0.0, 0.1 * T_O])
    ts = uniform_stamps(2, alpha)
    y_rec = to_frequency_reciprocal(ts, 1).values[0] / F_O
    y_ideal = to_frequency_ideal(ts, 1, F_O).values[0] / F_O
    assert y_rec == pytest.approx(1.1111, abs=1e-4)
    assert y_ideal == pytest.approx(1.1, rel=1e-9)


def test_large_z_separates_reciprocal_and_ideal():
    ts = uniform_stamps(2, np.array([0.0, 0.5 * T_O]))
    assert to_frequency_reciprocal(ts, 1).values[0] == pytest.approx(2.0 * F_O, rel=1e-9)
    assert to_frequency_ideal(ts, 1, F_O).values[0] == pytest.approx(1.5 * F_O, rel=1e-9)


def test_ideal_zero_alpha():
    np.testing.assert_allclose(to_frequency_ideal(uniform_stamps(50), 3, F_O).values, F_O, rtol=1e-9)


def test_small_z_agreement_is_second_order(rng):
    # z rms 0.01: the two conversions differ by z^2 ~ 1e-4 relative
    alpha = rng.normal(0, 0.01 * T_O / np.sqrt(2), 20000)
    ts = uniform_stamps(alpha.size, alpha)
    rec = to_frequency_reciprocal(ts, 1).values
    ideal = to_frequency_ideal(ts, 1, F_O).values
    z = ideal / F_O - 1
    # f/(1-z) against f(1+z): the ratio is exactly 1/(1-z^2); atol covers
    # the ~3e-12 rounding of a stamp difference relative to one period
    np.testing.assert_allclose(rec / ideal - 1, z**2 / (1 - z**2), rtol=1e-6, atol=1e-11)
    assert np.mean(rec / ideal - 1) == pytest.approx(1e-4, rel=0.05)


def test_power_series_mean_bias(rng):
    z_rms = 0.05
    alpha = np.cumsum(rng.normal(0, z_rms * T_O, 200001))
    ts = uniform_stamps(alpha.size, alpha)
    z = to_frequency_ideal(ts, 1, F_O).values / F_O - 1
    bias = to_frequency_reciprocal(ts, 1).values.mean() - to_frequency_ideal(ts, 1, F_O).values.mean()
    assert bias == pytest.approx(np.var(z) * F_O, rel=0.10)


def test_time_noise_recovers_alpha(rng):
    alpha = rng.normal(0, 1e-8, 100)
    np.testing.assert_allclose(time_noise(uniform_stamps(100, alpha), F_O), alpha, atol=1e-17)


def test_duplicate_stamps_rejected():
    with pytest.raises(ValueError):
        to_frequency_reciprocal(TimestampSeries([0.0, 1.0, 1.0]), 1)
    with pytest.raises(ValueError):
        frequency_from_pairs([0, 1, 2], [0.0, 1.0, 1.0])


def test_too_few_stamps_for_gate():
    with pytest.raises(ValueError, match="at least"):
        to_frequency_reciprocal(uniform_stamps(3), 3)


def test_frequency_from_pairs_matches_reciprocal(default_stamps):
    ts = divide(default_stamps, 5)
    pairs = frequency_from_pairs(ts.cycles, ts.times)
    np.testing.assert_allclose(pairs, to_frequency_reciprocal(ts, 1).values, rtol=1e-12)


# -- estimators -------------------------------------------------------------


def test_estimators_match_functions(default_stamps):
    ts = TimestampSeries(default_stamps.times[:5000])
    assert GateDivider(k=4).fit(ts).transform(ts).times.tolist() == divide(ts, 4).times.tolist()
    q = StampQuantizer().fit_transform(ts)
    np.testing.assert_array_equal(q.times, quantize(ts).times)
    np.testing.assert_array_equal(ReciprocalConverter(k=3).fit_transform(ts).values, to_frequency_reciprocal(ts, 3).values)
    np.testing.assert_array_equal(IdealConverter(k=3).fit_transform(ts).values, to_frequency_ideal(ts, 3, F_O).values)
    assert GateDivider(k=7).get_params() == {"k": 7}


def test_estimator_rejects_bad_params():
    with pytest.raises(ValueError):
        GateDivider(k=0).fit(uniform_stamps(10))
