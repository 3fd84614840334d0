"""Input checks shared by the estimators and the functional API."""

import numbers

import numpy as np
from sklearn.utils.validation import check_scalar

from .series import FrequencySeries, TimestampSeries, UniformSeries


def check_positive(x, name, include_zero=False, max_val=None):
    if include_zero:
        bounds = "left" if max_val is None else "both"
    else:
        bounds = "neither" if max_val is None else "right"
    return check_scalar(
        x, name, numbers.Real, min_val=0, max_val=max_val, include_boundaries=bounds
    )


def check_count(x, name, min_val=1, max_val=None):
    return check_scalar(x, name, numbers.Integral, min_val=min_val, max_val=max_val)


def check_timestamps(ts, min_len=1):
    if not isinstance(ts, TimestampSeries):
        ts = TimestampSeries(np.asarray(ts, dtype=float))
    if len(ts) < min_len:
        raise ValueError(f"need at least {min_len} time stamps, got {len(ts)}")
    return ts


def check_uniform(x, rate=None, min_len=1):
    """Coerce ``x`` into a UniformSeries.

    Plain arrays need an explicit ``rate``; FrequencySeries are viewed at
    their mean rate.
    """
    if isinstance(x, UniformSeries):
        series = x
    elif isinstance(x, FrequencySeries):
        series = x.as_uniform(rate)
    else:
        if rate is None:
            raise ValueError("a sample rate is required for plain arrays")
        series = UniformSeries(rate=rate, values=np.asarray(x))
    values = np.asarray(series.values)
    if values.ndim != 1:
        raise ValueError("series values must be one-dimensional")
    if values.size < min_len:
        raise ValueError(f"need at least {min_len} samples, got {values.size}")
    if values.dtype.kind == "f" and not np.all(np.isfinite(values)):
        raise ValueError("series contains non-finite values")
    return series
