"""Value types passed between the counter stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TimestampSeries:
    """Rising-edge time stamps of the counter input.

    ``times[i]`` is the instant at which the input phase crossed cycle
    ``first_cycle + i * k``. ``interp_res`` is 0 for unquantized stamps.
    """

    times: np.ndarray
    k: int = 1
    first_cycle: int = 0
    f_clk: float | None = None
    interp_res: float = 0.0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        if times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if self.k < 1:
            raise ValueError(f"gate factor k must be >= 1, got {self.k}")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("time stamps must be strictly increasing")

    def __len__(self):
        return self.times.size

    @property
    def cycles(self) -> np.ndarray:
        """Cycle index of every stamp."""
        return self.first_cycle + self.k * np.arange(self.times.size)

    @property
    def mean_rate(self) -> float:
        if self.times.size < 2:
            raise ValueError("need at least two stamps to define a rate")
        return (self.times.size - 1) / (self.times[-1] - self.times[0])


@dataclass(frozen=True)
class FrequencySeries:
    """Frequency estimates (Hz), each tagged with the stamp that closed its gate."""

    times: np.ndarray
    values: np.ndarray
    k: int = 1

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.shape != self.values.shape:
            raise ValueError("times and values must have the same shape")

    def __len__(self):
        return self.values.size

    @property
    def mean_rate(self) -> float:
        if self.times.size < 2:
            raise ValueError("need at least two samples to define a rate")
        return (self.times.size - 1) / (self.times[-1] - self.times[0])

    def as_uniform(self, rate: float | None = None) -> UniformSeries:
        """View the estimates as a fixed-rate sequence (mean rate by default)."""
        rate = self.mean_rate if rate is None else rate
        t0 = float(self.times[0]) if self.times.size else 0.0
        return UniformSeries(rate=rate, values=self.values, t0=t0)


@dataclass(frozen=True)
class UniformSeries:
    rate: float
    values: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values))
        if not self.rate > 0:
            raise ValueError(f"rate must be positive, got {self.rate}")

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.values.size) / self.rate

    def with_values(self, values, rate=None, t0=None) -> UniformSeries:
        return UniformSeries(
            rate=self.rate if rate is None else rate,
            values=values,
            t0=self.t0 if t0 is None else t0,
        )


@dataclass(frozen=True)
class AllanCurve:
    taus: np.ndarray
    sigmas: np.ndarray
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "taus", np.asarray(self.taus, dtype=float))
        object.__setattr__(self, "sigmas", np.asarray(self.sigmas, dtype=float))
        counts = self.counts
        if counts is None:
            counts = np.zeros(self.taus.size, dtype=int)
        object.__setattr__(self, "counts", np.asarray(counts, dtype=int))
        if not (self.taus.shape == self.sigmas.shape == self.counts.shape):
            raise ValueError("taus, sigmas and counts must have equal length")

    def __len__(self):
        return self.taus.size

    def at(self, taus) -> np.ndarray:
        """Log-log interpolation of sigma at arbitrary ``taus`` inside the curve."""
        taus = np.asarray(taus, dtype=float)
        if np.any(taus < self.taus[0] * (1 - 1e-9)) or np.any(taus > self.taus[-1] * (1 + 1e-9)):
            raise ValueError("requested tau outside the curve")
        return np.exp(np.interp(np.log(taus), np.log(self.taus), np.log(self.sigmas)))
