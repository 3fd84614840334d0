"""The complete counter chain: quantize, divide, resample, filter, convert.

Stamp-domain chains (``conversion_placement="after_filter"``) carry the pair
(cycle count, stamp time) through resampling and filtering and convert only
at the end, as the counter hardware does. Both members of the pair see the
same linear operations, so every filtered pair is still a consistent
(count, time) point and the final ``delta_count / delta_time`` is exact.
Times are handled as residuals against a mean-period ramp to keep float64
precision over long records.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_count, check_positive, check_timestamps
from .counter import DEFAULT_F_CLK, DEFAULT_INTERP_RES, divide, quantize
from .filters import FilterSpec, lowpass1, moving_average
from .resample import CicConfig, event_triggered_resample, zoh_cic_decimate
from .series import FrequencySeries, UniformSeries

PLACEMENTS = ("before_filter", "after_filter")
RESAMPLING = ("none", "cic", "event_triggered")


@dataclass(frozen=True)
class PipelineConfig:
    """Counter chain description.

    ``lpf`` is a ``lowpass1`` FilterSpec whose rate is left unbound (it runs
    at the rate of the stream it meets). ``downsample`` decimates the
    converted output. ``settle_time=None`` drops ten LPF time constants.
    Event-triggered resampling produces frequency samples directly, so it
    requires ``conversion_placement="before_filter"``.
    """

    k: int = 1
    conversion_placement: str = "after_filter"
    resampling: str = "none"
    cic: CicConfig = field(default_factory=CicConfig)
    lpf: FilterSpec | None = None
    mavg_window: int | None = None
    downsample: int | None = None
    T_int: float | None = None
    interp_res: float = DEFAULT_INTERP_RES
    settle_time: float | None = None

    def __post_init__(self):
        check_count(self.k, "k")
        if self.conversion_placement not in PLACEMENTS:
            raise ValueError(f"conversion_placement must be one of {PLACEMENTS}, got {self.conversion_placement!r}")
        if self.resampling not in RESAMPLING:
            raise ValueError(f"resampling must be one of {RESAMPLING}, got {self.resampling!r}")
        if self.lpf is not None and self.lpf.kind != "lowpass1":
            raise ValueError("the pipeline LPF slot takes a lowpass1 FilterSpec")
        if self.mavg_window is not None:
            check_count(self.mavg_window, "mavg_window")
        if self.downsample is not None:
            check_count(self.downsample, "downsample")
        check_positive(self.interp_res, "interp_res", include_zero=True)
        if self.settle_time is not None:
            check_positive(self.settle_time, "settle_time", include_zero=True)
        if self.resampling == "event_triggered":
            if self.T_int is None:
                raise ValueError("event_triggered resampling requires T_int")
            check_positive(self.T_int, "T_int")
            if self.conversion_placement != "before_filter":
                raise ValueError("event_triggered output is already a frequency stream; use conversion_placement='before_filter'")

    @property
    def f_clk(self):
        return self.cic.f_clk

    @property
    def lpf_cutoff(self):
        return None if self.lpf is None else self.lpf.cutoff

    def effective_settle_time(self):
        if self.settle_time is not None:
            return self.settle_time
        if self.lpf is None:
            return 0.0
        return 10.0 / (2 * math.pi * self.lpf.cutoff)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def build(cls, lpf_cutoff=None, R=None, N=None, f_clk=DEFAULT_F_CLK, **kw):
        """Flat-argument constructor used by the estimator and the config loader."""
        cic = CicConfig(N=2 if N is None else N, R=8192 if R is None else R, f_clk=f_clk)
        lpf = None if lpf_cutoff is None else FilterSpec("lowpass1", cutoff=lpf_cutoff)
        return cls(cic=cic, lpf=lpf, **kw)


def _filter_chain(series: UniformSeries, cfg: PipelineConfig):
    if cfg.mavg_window is not None:
        series = moving_average(series, cfg.mavg_window)
    if cfg.lpf is not None:
        series = lowpass1(series, cfg.lpf.cutoff)
    return series


def _pairs(ts):
    n = (ts.cycles - ts.cycles[0]).astype(float)
    period = (ts.times[-1] - ts.times[0]) / n[-1]
    resid = ts.times - ts.times[0] - n * period
    return n, resid, period


def _convert(n, resid, period):
    dn = np.diff(n)
    return dn / (period * dn + np.diff(resid))


def run_pipeline(ts, cfg: PipelineConfig) -> FrequencySeries:
    """Run the chain on raw stamps and return the output frequency stream (Hz).

    Output value ``i`` is the mean frequency over ``(times[i-1], times[i]]``.
    Samples earlier than the first stamp plus the settle time are dropped.
    """
    ts = check_timestamps(ts, min_len=3)
    if cfg.interp_res > 0:
        ts = quantize(ts, cfg.f_clk, cfg.interp_res)
    # residuals come from the undivided stamps so every gate shares one reference ramp
    n, resid, period = _pairs(ts)
    if cfg.k > 1:
        ts = divide(ts, cfg.k)
        n, resid = n[:: cfg.k], resid[:: cfg.k]
    if len(ts) < 3:
        raise ValueError("fewer than three stamps after division")
    origin = ts.times[0]

    if cfg.resampling == "event_triggered":
        ev = event_triggered_resample(ts, cfg.T_int)
        stream = UniformSeries(rate=1.0 / cfg.T_int, values=ev.values, t0=ev.times[0])
        stream = _filter_chain(stream, cfg)
        times, values = stream.times, stream.values
    else:
        if cfg.resampling == "cic":
            n_s = zoh_cic_decimate(ts, cfg.cic, values=n)
            r_s = zoh_cic_decimate(ts, cfg.cic, values=resid)
        else:
            rate = ts.mean_rate
            n_s = UniformSeries(rate=rate, values=n, t0=origin)
            r_s = UniformSeries(rate=rate, values=resid, t0=origin)
        if n_s.values.size < 3:
            raise ValueError("record too short for the resampler")
        if cfg.conversion_placement == "after_filter":
            # filter the per-sample increments: same result as differencing the
            # filtered pairs, without cancellation on the large count values
            dn = _filter_chain(n_s.with_values(np.diff(n_s.values)), cfg).values
            dr = _filter_chain(r_s.with_values(np.diff(r_s.values)), cfg).values
            values = dn / (period * dn + dr)
            labels = origin + period * _filter_chain(n_s, cfg).values + _filter_chain(r_s, cfg).values
            times = labels[1:]
        else:
            pair_times = origin + period * n_s.values + r_s.values
            freq = UniformSeries(rate=n_s.rate, values=_convert(n_s.values, r_s.values, period), t0=0.0)
            out = _filter_chain(freq, cfg)
            values = out.values
            times = pair_times[1:][pair_times.size - 1 - values.size :]

    if cfg.downsample is not None:
        values = values[:: cfg.downsample]
        times = times[:: cfg.downsample]
    keep = times >= origin + cfg.effective_settle_time()
    if keep.sum() < 2:
        raise ValueError("record shorter than the settle time")
    return FrequencySeries(times[keep], values[keep], k=cfg.k)


class FrequencyCounter(TransformerMixin, BaseEstimator):
    """Estimator front for :func:`run_pipeline`.

    ``transform`` maps a TimestampSeries to the output FrequencySeries.
    """

    def __init__(
        self,
        k=1,
        conversion_placement="after_filter",
        resampling="none",
        R=8192,
        N=2,
        f_clk=DEFAULT_F_CLK,
        interp_res=DEFAULT_INTERP_RES,
        lpf_cutoff=None,
        mavg_window=None,
        downsample=None,
        T_int=None,
        settle_time=None,
    ):
        self.k = k
        self.conversion_placement = conversion_placement
        self.resampling = resampling
        self.R = R
        self.N = N
        self.f_clk = f_clk
        self.interp_res = interp_res
        self.lpf_cutoff = lpf_cutoff
        self.mavg_window = mavg_window
        self.downsample = downsample
        self.T_int = T_int
        self.settle_time = settle_time

    def _config(self):
        return PipelineConfig.build(
            lpf_cutoff=self.lpf_cutoff,
            R=self.R,
            N=self.N,
            f_clk=self.f_clk,
            k=self.k,
            conversion_placement=self.conversion_placement,
            resampling=self.resampling,
            mavg_window=self.mavg_window,
            downsample=self.downsample,
            T_int=self.T_int,
            interp_res=self.interp_res,
            settle_time=self.settle_time,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X):
        return run_pipeline(X, self._config())


def with_changes(cfg: PipelineConfig, **changes) -> PipelineConfig:
    return replace(cfg, **changes)
