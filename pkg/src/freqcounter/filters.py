"""Adjustable digital filters of the counter chain.

All filters run at the native rate of the stream they are applied to, so one
cutoff value corresponds to the same analog bandwidth on every stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_count, check_positive, check_uniform
from .series import UniformSeries


@dataclass(frozen=True)
class FilterSpec:
    """Declarative filter description.

    ``kind`` is one of ``"lowpass1"``, ``"movingavg"`` or ``"bandpass"``.
    ``rate`` may be left as None when the filter is bound to a stream later.
    """

    kind: str
    cutoff: float | None = None
    window: int | None = None
    center: float | None = None
    bandwidth: float | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.kind == "lowpass1":
            check_positive(self.cutoff, "cutoff")
            if self.rate is not None and not self.cutoff < self.rate / 2:
                raise ValueError("cutoff must be below the Nyquist frequency")
        elif self.kind == "movingavg":
            check_count(self.window, "window")
        elif self.kind == "bandpass":
            check_positive(self.center, "center")
            check_positive(self.bandwidth, "bandwidth")
            if self.bandwidth / 2 >= self.center:
                raise ValueError("bandwidth must be smaller than twice the center frequency")
        else:
            raise ValueError(f"unknown filter kind {self.kind!r}")


def lowpass1_coefficients(cutoff, rate):
    """First-order low-pass via the bilinear transform, prewarped at ``cutoff``.

    Returns ``(b, a)`` with unity DC gain and exactly -3 dB at ``cutoff``.
    """
    check_positive(cutoff, "cutoff")
    check_positive(rate, "rate")
    if not cutoff < rate / 2:
        raise ValueError(f"cutoff {cutoff} Hz is not below Nyquist ({rate / 2} Hz)")
    warped = np.tan(np.pi * cutoff / rate)
    pole = (warped - 1) / (warped + 1)
    if abs(pole) >= 1 - 1e-12:
        raise ValueError(f"cutoff {cutoff} Hz too close to Nyquist for a stable filter")
    gain = warped / (1 + warped)
    return np.array([gain, gain]), np.array([1.0, pole])


def lowpass1_response(freqs, cutoff, rate=None):
    """Complex response of :func:`lowpass1` at ``freqs`` (Hz).

    With ``rate=None`` the analog prototype is returned.
    """
    freqs = np.asarray(freqs, dtype=float)
    if rate is None:
        return 1.0 / (1.0 + 1j * freqs / cutoff)
    b, a = lowpass1_coefficients(cutoff, rate)
    _, h = signal.freqz(b, a, worN=freqs, fs=rate)
    return h


def lowpass1(series, cutoff, rate=None):
    """Apply the first-order low-pass, starting in steady state on the first sample."""
    series = check_uniform(series, rate)
    b, a = lowpass1_coefficients(cutoff, series.rate)
    x = np.asarray(series.values, dtype=float)
    zi = signal.lfilter_zi(b, a) * x[0]
    y, _ = signal.lfilter(b, a, x, zi=zi)
    return series.with_values(y)


def moving_average(series, window, rate=None):
    """Trailing mean over ``window`` samples; output[i] belongs to input[i + window - 1]."""
    series = check_uniform(series, rate)
    check_count(window, "window")
    x = np.asarray(series.values, dtype=float)
    if window > x.size:
        raise ValueError(f"window {window} longer than the series ({x.size})")
    y = np.convolve(x, np.full(window, 1.0 / window), mode="valid")
    return series.with_values(y, t0=series.t0 + (window - 1) / series.rate)


def downsample(series, ratio, offset=0, rate=None):
    """Keep samples ``offset, offset + ratio, ...``."""
    series = check_uniform(series, rate)
    check_count(ratio, "ratio")
    check_count(offset, "offset", min_val=0, max_val=ratio - 1)
    return UniformSeries(
        rate=series.rate / ratio,
        values=np.asarray(series.values)[offset::ratio],
        t0=series.t0 + offset / series.rate,
    )


def bandpass(series, center, bandwidth, rate=None):
    """Second-order (first-order prototype) band-pass used to model the loop BPF."""
    series = check_uniform(series, rate)
    lo, hi = center - bandwidth / 2, center + bandwidth / 2
    if not hi < series.rate / 2:
        raise ValueError("band-pass upper edge must be below Nyquist")
    b, a = signal.butter(1, [lo, hi], btype="bandpass", fs=series.rate)
    return series.with_values(signal.lfilter(b, a, np.asarray(series.values, dtype=float)))


def apply_filter(series, spec: FilterSpec):
    if spec.kind == "lowpass1":
        return lowpass1(series, spec.cutoff, spec.rate)
    if spec.kind == "movingavg":
        return moving_average(series, spec.window, spec.rate)
    return bandpass(series, spec.center, spec.bandwidth, spec.rate)


class LowPassFilter(TransformerMixin, BaseEstimator):
    """First-order IIR low-pass as a transformer on UniformSeries.

    Parameters
    ----------
    cutoff : float
        -3 dB frequency in Hz.
    rate : float, optional
        Sample rate used when plain arrays are passed.
    """

    def __init__(self, cutoff=200.0, rate=None):
        self.cutoff = cutoff
        self.rate = rate

    def fit(self, X, y=None):
        series = check_uniform(X, self.rate)
        lowpass1_coefficients(self.cutoff, series.rate)
        self.rate_ = series.rate
        return self

    def transform(self, X):
        return lowpass1(X, self.cutoff, self.rate)


class MovingAverage(TransformerMixin, BaseEstimator):
    def __init__(self, window=121, rate=None):
        self.window = window
        self.rate = rate

    def fit(self, X, y=None):
        check_count(self.window, "window")
        self.rate_ = check_uniform(X, self.rate).rate
        return self

    def transform(self, X):
        return moving_average(X, self.window, self.rate)


class Downsampler(TransformerMixin, BaseEstimator):
    def __init__(self, ratio=121, offset=0, rate=None):
        self.ratio = ratio
        self.offset = offset
        self.rate = rate

    def fit(self, X, y=None):
        check_count(self.ratio, "ratio")
        check_count(self.offset, "offset", min_val=0, max_val=self.ratio - 1)
        self.rate_ = check_uniform(X, self.rate).rate / self.ratio
        return self

    def transform(self, X):
        return downsample(X, self.ratio, self.offset, self.rate)
