"""Behavioral SSO signal source: phase trajectory under thermomechanical and
detection noise, and its rising-edge time stamps.

Noise conventions
-----------------
Phase-noise levels are one-sided PSDs in rad^2/Hz, so a white sequence of
variance ``s2`` at rate ``fs`` has level ``2 * s2 / fs``. The fractional
frequency of the source is

    y = H_L[theta_th + theta_d] / (w0 * tau_r) + d/dt H_L[theta_d] / w0

with ``theta_d`` carrying ``K**2`` times the thermal level. The first term is
white frequency noise seen through the resonator, the second is detection
(white phase) noise. ``H_L`` is a first-order low-pass of half the loop BPF
bandwidth. The time noise ``alpha`` is the integral of ``y - 1``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal

from ._validation import check_count, check_positive
from .filters import lowpass1_coefficients
from .series import TimestampSeries

DEFAULT_CHUNK = 1 << 20


class SampleBudgetError(ValueError):
    """Raised when a synthesis request would exceed the sample budget."""


@dataclass(frozen=True)
class NoiseConfig:
    """Oscillator and noise-source parameters.

    ``S_th`` is a free calibration parameter: the absolute thermal level is
    not observable from the counter output alone. The defaults put the raw
    single-cycle counter at an Allan deviation near 1e-6 at 1 ms, with
    detection noise well below thermal noise. ``bpf_bandwidth=inf`` disables
    the loop band limit.
    """

    f_o: float = 119e3
    Q: float = 57.5e3
    S_th: float = 5e-8
    K: float = 0.03
    bpf_bandwidth: float = 5e3
    oversample: int = 64

    def __post_init__(self):
        check_positive(self.f_o, "f_o")
        check_positive(self.Q, "Q")
        check_positive(self.S_th, "S_th", include_zero=True)
        check_positive(self.K, "K", include_zero=True)
        check_positive(self.bpf_bandwidth, "bpf_bandwidth")
        check_count(self.oversample, "oversample", min_val=16)

    @property
    def omega_0(self) -> float:
        return 2 * math.pi * self.f_o

    @property
    def tau_r(self) -> float:
        return resonator_time_constant(self)

    @property
    def sample_rate(self) -> float:
        return self.oversample * self.f_o

    @property
    def loop_cutoff(self) -> float | None:
        """Cutoff (Hz) of the equivalent loop low-pass, None if unlimited."""
        if math.isinf(self.bpf_bandwidth):
            return None
        return self.bpf_bandwidth / 2

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PhaseTrajectory:
    """Sampled phase ``phase`` (cycles) and time noise ``alpha`` (s).

    ``phase[i] == f_o * (t0 + i / sample_rate + alpha[i])``.
    """

    sample_rate: float
    phase: np.ndarray
    alpha: np.ndarray
    f_o: float
    t0: float = 0.0

    @property
    def times(self):
        return self.t0 + np.arange(self.phase.size) / self.sample_rate

    def fractional_frequency(self):
        """Per-sample fractional frequency deviation ``dphi/dt / f_o - 1``."""
        return np.diff(self.alpha) * self.sample_rate


def resonator_time_constant(config: NoiseConfig) -> float:
    """Resonator amplitude time constant ``2 Q / w_r`` in seconds."""
    return 2 * config.Q / (2 * math.pi * config.f_o)


class _NoiseStream:
    # Produces consecutive chunks of alpha; chunking never changes the values.

    def __init__(self, config: NoiseConfig, seed):
        self.config = config
        fs = config.sample_rate
        self.dt = 1.0 / fs
        rng_th, rng_d = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        self.rng_th, self.rng_d = rng_th, rng_d
        self.sd_th = math.sqrt(config.S_th * fs / 2)
        self.sd_d = config.K * self.sd_th
        self.fm_gain = 1.0 / (config.omega_0 * config.tau_r)
        self.pm_gain = 1.0 / config.omega_0
        self.carry = 0.0
        cutoff = config.loop_cutoff
        if cutoff is not None and cutoff >= fs / 2:
            raise ValueError("loop bandwidth must stay below the simulation Nyquist rate")
        self.ba = None if cutoff is None else lowpass1_coefficients(cutoff, fs)
        if self.ba is not None:
            self.zi_th = np.zeros(1)
            self.zi_d = np.zeros(1)
            # discard the filter start-up transient
            warmup = int(math.ceil(20 * fs / (2 * math.pi * cutoff)))
            while warmup > 0:
                n = min(warmup, DEFAULT_CHUNK)
                self._filtered(n)
                warmup -= n

    def _filtered(self, n):
        th = self.rng_th.standard_normal(n) * self.sd_th
        d = self.rng_d.standard_normal(n) * self.sd_d
        if self.ba is not None:
            b, a = self.ba
            th, self.zi_th = signal.lfilter(b, a, th, zi=self.zi_th)
            d, self.zi_d = signal.lfilter(b, a, d, zi=self.zi_d)
        return th, d

    def next(self, n):
        th, d = self._filtered(n)
        # prepend the carry so the running sum is associated exactly as one long cumsum
        rw = np.cumsum(np.concatenate(([self.carry], (th + d) * (self.fm_gain * self.dt))))[1:]
        self.carry = rw[-1]
        return d * self.pm_gain + rw


def _n_samples(config, duration, max_samples):
    check_positive(duration, "duration")
    if duration * config.f_o < 100:
        raise ValueError("duration must cover at least 100 nominal cycles")
    n = int(round(duration * config.sample_rate)) + 1
    if n > max_samples:
        raise SampleBudgetError(
            f"{n} samples requested (duration={duration} s, oversample={config.oversample}), "
            f"budget is {max_samples}"
        )
    return n


def _chunks(config, duration, seed, chunk, max_samples):
    n_total = _n_samples(config, duration, max_samples)
    stream = _NoiseStream(config, seed)
    start = 0
    while start < n_total:
        n = min(chunk, n_total - start)
        alpha = stream.next(n)
        t = np.arange(start, start + n) / config.sample_rate
        yield start, config.f_o * (t + alpha), alpha
        start += n


def synthesize_phase(config: NoiseConfig, duration, seed=0, max_samples=1 << 25):
    """Synthesize the oscillator phase over ``duration`` seconds.

    Deterministic for a fixed ``seed``. Raises SampleBudgetError when
    ``duration * oversample * f_o`` exceeds ``max_samples``.
    """
    parts = list(_chunks(config, duration, seed, DEFAULT_CHUNK, max_samples))
    phase = np.concatenate([p for _, p, _ in parts])
    alpha = np.concatenate([a for _, _, a in parts])
    return PhaseTrajectory(config.sample_rate, phase, alpha, config.f_o)


def _crossings(phase, start_index, sample_rate, first_cycle):
    # Edge times for integer cycles first_cycle.. inside this block of samples.
    last = math.floor(phase[-1])
    if last < first_cycle:
        return np.empty(0), first_cycle
    cycles = np.arange(first_cycle, last + 1, dtype=float)
    hi = np.searchsorted(phase, cycles, side="left")
    lo = np.maximum(hi - 1, 0)
    hi = lo + 1
    frac = (cycles - phase[lo]) / (phase[hi] - phase[lo])
    return (start_index + lo + frac) / sample_rate, last + 1


def extract_timestamps(traj: PhaseTrajectory) -> TimestampSeries:
    """Rising-edge instants ``t_n`` with ``phase(t_n) = n`` for every integer n.

    Linear inverse interpolation between the bracketing phase samples. With
    sample interval ``h`` the error per stamp is bounded by
    ``h**2 * max|dy/dt| / (8 * min y)`` where ``y`` is the fractional
    frequency, i.e. quadratic in the sample interval.
    """
    phase = np.asarray(traj.phase, dtype=float)
    if phase.size < 2:
        raise ValueError("trajectory needs at least two samples")
    if not np.all(np.diff(phase) > 0):
        raise ValueError("phase is not strictly increasing")
    first = math.ceil(phase[0])
    offset = traj.t0 * traj.sample_rate
    times, _ = _crossings(phase, offset, traj.sample_rate, first)
    return TimestampSeries(times, k=1, first_cycle=first)


def synthesize_timestamps(
    config: NoiseConfig, duration, seed=0, chunk=DEFAULT_CHUNK, max_samples=1 << 34
) -> TimestampSeries:
    """Streaming equivalent of ``extract_timestamps(synthesize_phase(...))``.

    Memory stays bounded by ``chunk`` samples, so full-length records
    (10 s at 64x oversampling) are feasible.
    """
    pieces = []
    first = None
    prev = None  # (index, phase) of the last sample of the previous chunk
    next_cycle = None
    for start, phase, _ in _chunks(config, duration, seed, chunk, max_samples):
        if prev is not None:
            phase = np.concatenate(([prev[1]], phase))
            start = prev[0]
        if not np.all(np.diff(phase) > 0):
            raise ValueError("phase is not strictly increasing")
        if first is None:
            first = next_cycle = math.ceil(phase[0])
        times, next_cycle = _crossings(phase, start, config.sample_rate, next_cycle)
        pieces.append(times)
        prev = (start + phase.size - 1, phase[-1])
    return TimestampSeries(np.concatenate(pieces), k=1, first_cycle=first)
