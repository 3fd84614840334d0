"""Fixed-rate resampling of the input-dependent counter output.

Two routes: zero-order hold onto the counter clock followed by a second-order
CIC decimator, and the event-triggered baseline that samples the counter at
the first input edge after each trigger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_count, check_positive, check_timestamps, check_uniform
from .counter import DEFAULT_F_CLK, to_frequency_reciprocal
from .series import FrequencySeries, TimestampSeries, UniformSeries

# tolerance (in clock periods) when mapping event times onto clock ticks
_TICK_EPS = 1e-6


class SignalLostError(RuntimeError):
    """No input edge followed a trigger within the allowed window."""


@dataclass(frozen=True)
class CicConfig:
    """Second-order CIC decimator: ``R`` decimation, ``N`` comb delay."""

    order: int = 2
    N: int = 2
    R: int = 8192
    f_clk: float = DEFAULT_F_CLK

    def __post_init__(self):
        if self.order != 2:
            raise ValueError("only second-order CIC decimators are supported")
        check_count(self.N, "N")
        check_count(self.R, "R")
        check_positive(self.f_clk, "f_clk")

    @property
    def output_rate(self) -> float:
        return self.f_clk / self.R

    @property
    def dc_gain(self) -> int:
        return (self.R * self.N) ** self.order

    def magnitude(self, freqs):
        """Gain-normalized magnitude ``|sin(pi f RN/fclk) / (RN sin(pi f/fclk))|**2``."""
        x = np.pi * np.asarray(freqs, dtype=float) / self.f_clk
        L = self.R * self.N
        with np.errstate(invalid="ignore", divide="ignore"):
            h = np.sin(L * x) / (L * np.sin(x))
        h = np.where(np.isclose(np.sin(x), 0.0, atol=1e-15), 1.0, h)
        return np.abs(h) ** self.order


def _irregular(stream, values=None):
    if isinstance(stream, FrequencySeries):
        return stream.times, stream.values
    if isinstance(stream, TimestampSeries):
        if values is None:
            return stream.times, stream.times
        return stream.times, np.asarray(values)
    times = np.asarray(stream, dtype=float)
    if values is None:
        raise ValueError("values are required when passing raw event times")
    return times, np.asarray(values)


def _ticks(times, f_clk):
    # first clock edge at or after each event
    return np.ceil(np.asarray(times) * f_clk - _TICK_EPS).astype(np.int64)


def zoh_upsample(stream, f_clk=DEFAULT_F_CLK, t_end=None, values=None):
    """Hold each event value from its clock edge until the next event.

    The output covers every clock tick from the first event up to ``t_end``
    (default: the last event) at rate ``f_clk``.
    """
    times, vals = _irregular(stream, values)
    if times.size == 0:
        raise ValueError("cannot hold an empty stream")
    check_positive(f_clk, "f_clk")
    ticks = _ticks(times, f_clk)
    last = ticks[-1] if t_end is None else int(math.floor(t_end * f_clk + _TICK_EPS))
    if last < ticks[0]:
        raise ValueError("t_end precedes the first event")
    grid = np.arange(ticks[0], last + 1)
    idx = np.searchsorted(ticks, grid, side="right") - 1
    return UniformSeries(rate=f_clk, values=vals[idx], t0=ticks[0] / f_clk)


def cic_decimate(series, cfg: CicConfig = CicConfig(), drop_transient=False):
    """Integrate twice at ``f_clk``, keep every R-th sample, comb twice with delay N.

    Integer input runs in int64 with two's-complement wraparound, which is
    exact as long as ``(R*N)**2 * max|x|`` fits in 63 bits. Float input is
    accumulated in float64. The output is divided by the DC gain
    ``(R*N)**2``. ``drop_transient`` removes the first ``2*N`` outputs, whose
    window reaches before the start of the stream.
    """
    series = check_uniform(series)
    if not math.isclose(series.rate, cfg.f_clk, rel_tol=1e-12):
        raise ValueError(f"series rate {series.rate} Hz does not match f_clk {cfg.f_clk} Hz")
    x = np.asarray(series.values)
    if x.dtype.kind in "iub":
        bound = cfg.dc_gain * int(np.max(np.abs(x.astype(np.int64)), initial=0))
        if bound >= 2**63:
            raise OverflowError(f"CIC word width exceeded: (RN)^2 * max|x| = {bound}")
        x = x.astype(np.int64)
    else:
        x = x.astype(float)
    with np.errstate(over="ignore"):
        acc = np.cumsum(np.cumsum(x))
        dec = acc[cfg.R - 1 :: cfg.R]
        delay = cfg.N
        for _ in range(cfg.order):
            prev = np.zeros_like(dec)
            prev[delay:] = dec[: max(dec.size - delay, 0)]
            dec = dec - prev
    out = dec.astype(float) / cfg.dc_gain
    t0 = series.t0 + (cfg.R - 1) / cfg.f_clk
    if drop_transient:
        skip = min(2 * cfg.N, out.size)
        out = out[skip:]
        t0 += skip * cfg.R / cfg.f_clk
    return UniformSeries(rate=cfg.output_rate, values=out, t0=t0)


def _tri_cumweight(x, L):
    # sum of the first x weights of the length 2L-1 triangle (1, 2, .., L, .., 1)
    x = np.clip(x, 0, 2 * L - 1).astype(float)
    rising = x * (x + 1) / 2
    tail = 2 * L - 1 - x
    falling = L * L - tail * (tail + 1) / 2
    return np.where(x <= L, rising, falling)


def zoh_cic_decimate(stream, cfg: CicConfig = CicConfig(), t_end=None, values=None):
    """Exact ``cic_decimate(zoh_upsample(stream), drop_transient=True)`` without
    materializing the clock-rate stream.

    Each held segment contributes its value times the integer triangle
    weight it overlaps in every output window, so cost scales with the
    number of events rather than with ``f_clk``.
    """
    times, vals = _irregular(stream, values)
    if times.size == 0:
        raise ValueError("cannot hold an empty stream")
    vals = np.asarray(vals, dtype=float)
    ticks = _ticks(times, cfg.f_clk)
    i0 = ticks[0]
    last = ticks[-1] if t_end is None else int(math.floor(t_end * cfg.f_clk + _TICK_EPS))
    n = last - i0 + 1
    R, L = cfg.R, cfg.R * cfg.N
    n_out = n // R
    first_out = 2 * cfg.N
    t0 = (i0 + (first_out + 1) * R - 1) / cfg.f_clk
    if n_out <= first_out:
        return UniformSeries(rate=cfg.output_rate, values=np.empty(0), t0=t0)
    keep = ticks <= last
    a = ticks[keep] - i0
    v = vals[keep]
    b = np.append(a[1:], n)
    ref = v[0]
    v = v - ref
    m_lo = np.maximum(np.ceil((a - R + 1) / R).astype(np.int64), 0)
    m_hi = np.minimum((b + 2 * L - 2 - R) // R, n_out - 1)
    width = int(np.max(m_hi - m_lo, initial=0)) + 1
    out = np.zeros(n_out)
    for step in range(width):
        m = m_lo + step
        valid = m <= m_hi
        if not np.any(valid):
            continue
        mm = m[valid]
        j = mm * R + R - 1
        w = _tri_cumweight(j - a[valid] + 1, L) - _tri_cumweight(j - b[valid] + 1, L)
        out += np.bincount(mm, weights=v[valid] * w, minlength=n_out)
    out = out[first_out:] / (L * L) + ref
    return UniformSeries(rate=cfg.output_rate, values=out, t0=t0)


@dataclass(frozen=True)
class EventSampledSeries(FrequencySeries):
    """Frequency samples on the trigger grid, with the actual edge instants."""

    sample_times: np.ndarray = None

    @property
    def trigger_times(self):
        return self.times

    @property
    def sampling_error(self):
        """Lag of each actual sampling instant behind its trigger, in [0, T_o)."""
        return self.sample_times - self.times


def event_triggered_resample(ts, T_int, k=None, max_wait=10):
    """Sample the counter at the first edge at or after every trigger ``m * T_int``.

    With ``k=None`` each output is the reciprocal estimate over the span
    between consecutive sampled edges (continuous event-triggered stamping);
    an integer ``k`` instead takes the k-cycle estimate formed at the sampled
    edge. Outputs are placed on the trigger grid, which is how a fixed-rate
    consumer sees them; the actual instants lag the triggers by up to one
    input period and are kept in ``sample_times``.
    Raises SignalLostError if no edge arrives within ``max_wait * T_int``.
    """
    ts = check_timestamps(ts, min_len=3 if k is None else k + 2)
    check_positive(T_int, "T_int")
    if k is not None:
        check_count(k, "k")
    period = 1.0 / ts.mean_rate  # stamp spacing
    if T_int < period * (1 - 1e-9):
        raise ValueError(f"T_int={T_int} s is shorter than the stamp spacing {period} s")
    if k is None:
        edges, cycles = ts.times, ts.cycles.astype(float)
    else:
        freq = to_frequency_reciprocal(ts, k)
        edges = freq.times
    m_first = math.ceil(edges[0] / T_int - 1e-12)
    m_last = math.floor(edges[-1] / T_int + 1e-12)
    triggers = np.arange(m_first, m_last + 1) * T_int
    # m * T_int can round just past the last edge
    triggers = triggers[triggers <= edges[-1]]
    idx = np.searchsorted(edges, triggers, side="left")
    waits = edges[idx] - triggers
    late = waits > max_wait * T_int
    if np.any(late):
        raise SignalLostError(f"no input edge within {max_wait} T_int after trigger at {triggers[np.argmax(late)]} s")
    if k is None:
        if idx.size < 2:
            raise ValueError("fewer than two triggers inside the record")
        span_cycles = np.diff(cycles[idx])
        values = span_cycles / np.diff(edges[idx])
        return EventSampledSeries(
            times=triggers[1:], values=values, k=ts.k, sample_times=edges[idx][1:]
        )
    return EventSampledSeries(
        times=triggers, values=freq.values[idx], k=freq.k, sample_times=edges[idx]
    )


class ZohCicResampler(TransformerMixin, BaseEstimator):
    """Zero-order hold onto the counter clock plus CIC decimation.

    Accepts FrequencySeries (values held) and returns a UniformSeries at
    ``f_clk / R``.
    """

    def __init__(self, R=8192, N=2, f_clk=DEFAULT_F_CLK):
        self.R = R
        self.N = N
        self.f_clk = f_clk

    def fit(self, X, y=None):
        self.cic_ = CicConfig(N=self.N, R=self.R, f_clk=self.f_clk)
        return self

    def transform(self, X):
        return zoh_cic_decimate(X, CicConfig(N=self.N, R=self.R, f_clk=self.f_clk))


class EventTriggeredSampler(TransformerMixin, BaseEstimator):
    def __init__(self, T_int=100e-6, k=None):
        self.T_int = T_int
        self.k = k

    def fit(self, X, y=None):
        check_positive(self.T_int, "T_int")
        if self.k is not None:
            check_count(self.k, "k")
        return self

    def transform(self, X):
        return event_triggered_resample(X, self.T_int, self.k)
