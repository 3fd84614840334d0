"""Baseband model of a lock-in PLL frequency detector.

Phase is handled in degrees inside the loop (1 cycle = 360 deg) so the
proportional and integral gains keep their Hz/deg and Hz/deg/s units. The
detector has unity gain; the controlled oscillator integrates its frequency
deviation with one sample of delay.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_positive, check_timestamps, check_uniform
from .filters import lowpass1_coefficients
from .series import FrequencySeries, UniformSeries
from .stability import allan_from_psd


class PllUnstableError(RuntimeError):
    """Closed loop has a pole on or outside the unit circle, or its output diverged."""


@dataclass(frozen=True)
class PllConfig:
    kp: float = 2.92
    ki: float = 13.34
    demod_cutoff: float = 1e3
    rate: float = 27e3
    target_bw: float = 200.0

    def __post_init__(self):
        for name in ("kp", "ki", "demod_cutoff", "rate", "target_bw"):
            check_positive(getattr(self, name), name)
        if not self.rate > 2 * self.demod_cutoff:
            raise ValueError("rate must exceed twice the demodulator cutoff")

    def to_dict(self):
        return asdict(self)


def _loop_polys(cfg: PllConfig):
    # Polynomials in z^-1 of the open-loop pieces: controller*demod, and the CO integrator.
    T = 1.0 / cfg.rate
    bd, ad = lowpass1_coefficients(cfg.demod_cutoff, cfg.rate)
    bc = np.array([cfg.kp + cfg.ki * T, -cfg.kp])
    ac = np.array([1.0, -1.0])
    b_fwd = np.polymul(bc, bd)
    a_fwd = np.polymul(ac, ad)
    b_co = np.array([0.0, 360.0 * T])
    a_co = np.array([1.0, -1.0])
    return b_fwd, a_fwd, b_co, a_co


def _add(p, q):
    n = max(p.size, q.size)
    return np.pad(p, (0, n - p.size)) + np.pad(q, (0, n - q.size))


def frequency_transfer(cfg: PllConfig):
    """``(b, a)`` from input phase (deg) to CO frequency deviation (Hz)."""
    b_fwd, a_fwd, b_co, a_co = _loop_polys(cfg)
    b = np.polymul(b_fwd, a_co)
    a = _add(np.polymul(a_fwd, a_co), np.polymul(b_fwd, b_co))
    return np.trim_zeros(b, "b"), np.trim_zeros(a, "b")


def phase_transfer(cfg: PllConfig):
    """``(b, a)`` of the closed-loop phase response ``phi_co / phi_in``."""
    b, a = frequency_transfer(cfg)
    return np.polymul(b, [0.0, 360.0 / cfg.rate]), np.polymul(a, [1.0, -1.0])


def check_stability(cfg: PllConfig):
    _, a = frequency_transfer(cfg)
    radius = float(np.max(np.abs(np.roots(a)))) if a.size > 1 else 0.0
    if radius >= 1.0:
        raise PllUnstableError(f"closed-loop pole radius {radius:.6f} >= 1 for {cfg}")
    return radius


def closed_loop_bandwidth(cfg: PllConfig, n_points=20000):
    """-3 dB frequency (Hz) of the realized closed-loop phase response."""
    check_stability(cfg)
    b, a = phase_transfer(cfg)
    freqs = np.geomspace(1e-2, cfg.rate / 2 * 0.999, n_points)
    _, h = signal.freqz(b, a, worN=freqs, fs=cfg.rate)
    below = np.nonzero(np.abs(h) < 1 / math.sqrt(2))[0]
    if below.size == 0:
        return cfg.rate / 2
    i = below[0]
    # interpolate the crossing in log frequency
    m0, m1 = np.abs(h[i - 1]), np.abs(h[i])
    frac = (m0 - 1 / math.sqrt(2)) / (m0 - m1)
    return float(math.exp(math.log(freqs[i - 1]) + frac * (math.log(freqs[i]) - math.log(freqs[i - 1]))))


def phase_from_timestamps(ts, rate, f_ref=None):
    """Oscillator phase deviation (cycles) from ``f_ref * t`` sampled at ``rate``.

    The cycle count is interpolated linearly between stamps. ``f_ref``
    defaults to the mean stamp rate, so the deviation starts near zero.
    """
    ts = check_timestamps(ts, min_len=2)
    check_positive(rate, "rate")
    t = ts.times
    cycles = ts.cycles.astype(float)
    if f_ref is None:
        f_ref = (cycles[-1] - cycles[0]) / (t[-1] - t[0])
    i0 = math.ceil(t[0] * rate)
    i1 = math.floor(t[-1] * rate)
    if i1 - i0 < 1:
        raise ValueError("stamps span less than two samples at the requested rate")
    grid = np.arange(i0, i1 + 1) / rate
    # reference the count to the first stamp so the subtraction stays well conditioned
    rel = (cycles - cycles[0]) - f_ref * (t - t[0])
    dev = np.interp(grid, t, rel)
    return UniformSeries(rate=rate, values=dev, t0=i0 / rate), f_ref


def pll_track(phase, cfg: PllConfig = PllConfig(), f_ref=0.0):
    """Track an input phase deviation (cycles, sampled at ``cfg.rate``).

    Returns the CO frequency ``f_ref + delta_f`` as a FrequencySeries on the
    input grid. The loop starts at rest with the CO phase equal to the first
    input sample.
    """
    series = check_uniform(phase, cfg.rate, min_len=2)
    if not math.isclose(series.rate, cfg.rate, rel_tol=1e-12):
        raise ValueError(f"phase stream rate {series.rate} Hz differs from the loop rate {cfg.rate} Hz")
    check_stability(cfg)
    b, a = frequency_transfer(cfg)
    deg = (np.asarray(series.values, dtype=float) - series.values[0]) * 360.0
    df = signal.lfilter(b, a, deg)
    if not np.all(np.isfinite(df)) or np.max(np.abs(df)) > 1e3 * (1 + np.max(np.abs(np.diff(deg))) * cfg.rate):
        raise PllUnstableError("CO frequency diverged")
    # the CO frequency set at sample n drives the phase over (n, n+1]
    return FrequencySeries(series.times + 1.0 / cfg.rate, f_ref + df, k=1)


def pll_psd_gain(cfg: PllConfig, omega):
    """``|phi_co / phi_in|**2`` at angular frequency ``omega``; unity above Nyquist is not assumed."""
    b, a = phase_transfer(cfg)
    f = np.asarray(omega, dtype=float) / (2 * math.pi)
    _, h = signal.freqz(b, a, worN=np.clip(f, 0, cfg.rate / 2), fs=cfg.rate)
    return np.abs(h) ** 2


def predicted_pll_ad(psd, cfg: PllConfig, taus):
    """AD of the CO frequency for a source with fractional PSD ``psd(w)``."""
    return allan_from_psd(lambda w: psd(w) * pll_psd_gain(cfg, w), taus, omega_max=math.pi * cfg.rate)


class PLLFrequencyDetector(TransformerMixin, BaseEstimator):
    """Transformer from a TimestampSeries to the CO frequency stream.

    ``fit`` checks loop stability and stores ``bandwidth_`` (Hz).
    """

    def __init__(self, kp=2.92, ki=13.34, demod_cutoff=1e3, rate=27e3):
        self.kp = kp
        self.ki = ki
        self.demod_cutoff = demod_cutoff
        self.rate = rate

    def _cfg(self):
        return PllConfig(self.kp, self.ki, self.demod_cutoff, self.rate)

    def fit(self, X=None, y=None):
        cfg = self._cfg()
        self.bandwidth_ = closed_loop_bandwidth(cfg)
        return self

    def transform(self, X):
        phase, f_ref = phase_from_timestamps(X, self.rate)
        return pll_track(phase, self._cfg(), f_ref)
