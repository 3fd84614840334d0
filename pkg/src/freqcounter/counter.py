"""Interpolating reciprocal counter front-end.

The primitive output is the sliding k-cycle estimate at every stamp, which is
what k interleaved front-ends would deliver. The one-estimate-per-gate output
of a single front-end is ``to_frequency_reciprocal(divide(ts, k), 1)``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_count, check_positive, check_timestamps
from .series import FrequencySeries, TimestampSeries

DEFAULT_F_CLK = 76.92e6
DEFAULT_INTERP_RES = 100e-12


class QuantizationError(ValueError):
    """Stamps too dense for the interpolator grid."""


def divide(ts, k):
    """Keep every k-th stamp starting at index 0."""
    ts = check_timestamps(ts)
    check_count(k, "k")
    return TimestampSeries(
        ts.times[::k],
        k=ts.k * k,
        first_cycle=ts.first_cycle,
        f_clk=ts.f_clk,
        interp_res=ts.interp_res,
    )


def quantize(ts, f_clk=DEFAULT_F_CLK, interp_res=DEFAULT_INTERP_RES):
    """Round stamps to the clock-plus-interpolator grid of pitch ``interp_res``.

    A stamp that lands on or before its predecessor is pushed one grid step
    past it. Needing more than one step is reported as QuantizationError.
    """
    ts = check_timestamps(ts)
    check_positive(f_clk, "f_clk")
    check_positive(interp_res, "interp_res", include_zero=True)
    if interp_res > 1.0 / f_clk:
        raise ValueError("interp_res must not exceed the clock period")
    if interp_res == 0:
        return TimestampSeries(ts.times.copy(), ts.k, ts.first_cycle, f_clk, 0.0)
    ticks = np.rint(ts.times / interp_res).astype(np.int64)
    bumped = np.maximum.accumulate(ticks - np.arange(ticks.size)) + np.arange(ticks.size)
    if np.any(bumped - ticks > 1):
        raise QuantizationError(
            f"stamps closer than the {interp_res:g} s grid over more than one step"
        )
    return TimestampSeries(bumped * interp_res, ts.k, ts.first_cycle, f_clk, interp_res)


def _gate_lags(ts, k):
    ts = check_timestamps(ts, min_len=k + 1)
    check_count(k, "k")
    spans = ts.times[k:] - ts.times[:-k]
    if np.any(spans <= 0):
        raise ValueError("duplicate or decreasing time stamps")
    return ts, spans


def to_frequency_reciprocal(ts, k=1):
    """Sliding reciprocal estimate ``cycles / (t_n - t_{n-k})`` at every stamp n >= k."""
    ts, spans = _gate_lags(ts, k)
    cycles = k * ts.k
    return FrequencySeries(ts.times[k:], cycles / spans, k=cycles)


def time_noise(ts, f_o):
    """Recover ``alpha(t_n) = n / f_o - t_n`` from the stamps."""
    ts = check_timestamps(ts)
    return ts.cycles / f_o - ts.times


def to_frequency_ideal(ts, k, f_o):
    """Linearized conversion ``f_o * (1 + z)`` with ``z = f_o * (alpha_n - alpha_{n-k}) / cycles``.

    With stamps ``t_n = n / f_o - alpha_n`` the gate span is
    ``cycles / f_o * (1 - z)``, so the reciprocal estimate is
    ``f_o / (1 - z)`` and this is its first-order term. Needs the nominal
    frequency; serves as the linear reference for the reciprocal conversion.
    """
    ts, _ = _gate_lags(ts, k)
    check_positive(f_o, "f_o")
    alpha = time_noise(ts, f_o)
    cycles = k * ts.k
    values = f_o * (1.0 + (alpha[k:] - alpha[:-k]) * f_o / cycles)
    return FrequencySeries(ts.times[k:], values, k=cycles)


def frequency_from_pairs(counts, times, lag=1):
    """Frequency from (cycle count, time) pairs: ``d(count) / d(time)`` over ``lag`` samples.

    Reduces to the reciprocal estimate for raw stamps and stays valid for
    counts and times that have been resampled or filtered identically.
    """
    counts = np.asarray(counts, dtype=float)
    times = np.asarray(times, dtype=float)
    spans = times[lag:] - times[:-lag]
    if np.any(spans <= 0):
        raise ValueError("filtered time stamps are not increasing")
    return (counts[lag:] - counts[:-lag]) / spans


class GateDivider(TransformerMixin, BaseEstimator):
    """Front-end divider: one stamp every ``k`` input cycles."""

    def __init__(self, k=1):
        self.k = k

    def fit(self, X, y=None):
        check_count(self.k, "k")
        check_timestamps(X)
        return self

    def transform(self, X):
        return divide(X, self.k)


class StampQuantizer(TransformerMixin, BaseEstimator):
    def __init__(self, f_clk=DEFAULT_F_CLK, interp_res=DEFAULT_INTERP_RES):
        self.f_clk = f_clk
        self.interp_res = interp_res

    def fit(self, X, y=None):
        check_positive(self.f_clk, "f_clk")
        check_positive(self.interp_res, "interp_res", include_zero=True)
        return self

    def transform(self, X):
        return quantize(X, self.f_clk, self.interp_res)


class ReciprocalConverter(TransformerMixin, BaseEstimator):
    """Time-stamp to frequency conversion with a gate of ``k`` stamps."""

    def __init__(self, k=1):
        self.k = k

    def fit(self, X, y=None):
        check_count(self.k, "k")
        check_timestamps(X, min_len=self.k + 1)
        return self

    def transform(self, X):
        return to_frequency_reciprocal(X, self.k)


class IdealConverter(TransformerMixin, BaseEstimator):
    def __init__(self, k=1, f_o=119e3):
        self.k = k
        self.f_o = f_o

    def fit(self, X, y=None):
        check_count(self.k, "k")
        check_positive(self.f_o, "f_o")
        return self

    def transform(self, X):
        return to_frequency_ideal(X, self.k, self.f_o)
