"""Allan deviation: estimation from sampled data and prediction from spectra.

PSD convention: every spectral density here is one-sided, per Hz, written as
a function of angular frequency ``w`` (rad/s) and integrated from 0 to
infinity. White frequency noise of level ``S`` then has
``sigma_y**2(tau) = S / (2 tau)``; a white sequence of variance ``s2`` at
rate ``r`` has level ``2 s2 / r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_positive, check_uniform
from .series import AllanCurve

_GL_X, _GL_W = np.polynomial.legendre.leggauss(24)


# --------------------------------------------------------------------------
# time-domain estimators


def _block_sizes(taus, rate):
    ms = []
    for tau in np.atleast_1d(np.asarray(taus, dtype=float)):
        m = tau * rate
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > 1e-6 * max(m, 1.0):
            raise ValueError(f"tau={tau!r} s is not an integer multiple of the sample interval {1 / rate!r} s")
        ms.append(mi)
    return np.asarray(ms, dtype=np.int64)


def default_taus(n, rate, per_decade=10, min_blocks=2):
    """Log-spaced taus on the sample grid with at least ``min_blocks`` blocks."""
    m_max = n // min_blocks
    if m_max < 1:
        return np.empty(0)
    ms = np.unique(np.rint(np.logspace(0, math.log10(m_max), int(per_decade * math.log10(max(m_max, 2))) + 1)))
    ms = ms[(ms >= 1) & (ms <= m_max)]
    return ms / rate


def allan_from_blocks(values, ms, rate, overlapping=False):
    """AD of a fixed-rate sequence for block sizes ``ms`` (samples)."""
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    sig, counts = [], []
    csum = np.concatenate(([0.0], np.cumsum(x))) if overlapping else None
    for m in ms:
        n_blocks = x.size // m
        if n_blocks < 2:
            raise ValueError(f"block size {m} leaves fewer than two blocks of {x.size} samples")
        if overlapping:
            sums = csum[m:] - csum[:-m]
            d = (sums[m:] - sums[:-m]) / m
            sig.append(math.sqrt(np.mean(d * d) / 2))
        else:
            means = x[: n_blocks * m].reshape(n_blocks, m).mean(axis=1)
            d = np.diff(means)
            sig.append(math.sqrt(np.sum(d * d) / (2 * (n_blocks - 1))))
        counts.append(n_blocks)
    return AllanCurve(np.asarray(ms) / rate, sig, counts)


def allan_deviation(y, taus=None, rate=None, overlapping=False):
    """Allan deviation of fractional-frequency samples ``y``.

    Each tau must be an integer multiple ``m`` of the sample interval;
    consecutive blocks of ``m`` samples are averaged and the two-sample
    variance is taken over successive non-overlapping block pairs.
    ``counts`` reports the number of blocks per tau.
    """
    series = check_uniform(y, rate, min_len=2)
    if taus is None:
        taus = default_taus(series.values.size, series.rate)
    ms = _block_sizes(taus, series.rate)
    return allan_from_blocks(series.values, ms, series.rate, overlapping)


def counts_from_frequency(times, values):
    """Integrate a frequency record into cumulative cycles at its own sample times.

    Value ``i`` is taken as the mean frequency over ``(t[i-1], t[i]]``, which
    is how reciprocal estimates are stamped; ``counts[0] = 0``.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    return np.concatenate(([0.0], np.cumsum(values[1:] * np.diff(times))))


def _edge_grid(grid, t_start, t_lo, t_hi):
    grid = np.asarray(grid, dtype=float)
    grid = grid[(grid >= max(t_start, t_lo)) & (grid <= t_hi)]
    if grid.size < 3:
        raise ValueError("edge grid has fewer than three instants inside the record")
    return grid


def allan_deviation_timed(series, taus, f_nom, grid=None, t_start=-math.inf):
    """Allan deviation over explicit time intervals.

    The record is integrated to a count-versus-time curve (linear between
    samples) and each block average is ``delta_count / delta_t / f_nom - 1``
    between consecutive edges. Edges are every ``m``-th instant of ``grid``
    (default: the series' own times) from ``t_start`` on, with
    ``m = round(tau / median grid spacing)``. Passing the same grid for two
    records evaluates both over identical intervals, which is what curve
    comparisons between differently sampled chains need. For a uniform
    record on its own grid this reduces to :func:`allan_deviation`.
    """
    times = np.asarray(series.times, dtype=float)
    counts = counts_from_frequency(times, series.values)
    grid = _edge_grid(times if grid is None else grid, t_start, times[0], times[-1])
    h = float(np.median(np.diff(grid)))
    taus_eff, sig, n_blocks = [], [], []
    for tau in np.atleast_1d(np.asarray(taus, dtype=float)):
        m = max(int(round(tau / h)), 1)
        edges = grid[::m]
        if edges.size < 3:
            raise ValueError(f"tau={tau} s leaves fewer than two blocks")
        n_at = np.interp(edges, times, counts)
        ybar = np.diff(n_at) / np.diff(edges) / f_nom - 1.0
        d = np.diff(ybar)
        sig.append(math.sqrt(np.sum(d * d) / (2 * d.size)))
        taus_eff.append(m * h)
        n_blocks.append(ybar.size)
    return AllanCurve(taus_eff, sig, n_blocks)


def loglog_slope(curve: AllanCurve, tau_min=None, tau_max=None):
    """Least-squares slope of log(sigma) against log(tau) inside [tau_min, tau_max]."""
    sel = np.ones(len(curve), bool)
    if tau_min is not None:
        sel &= curve.taus >= tau_min * (1 - 1e-9)
    if tau_max is not None:
        sel &= curve.taus <= tau_max * (1 + 1e-9)
    if sel.sum() < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(np.log(curve.taus[sel]), np.log(curve.sigmas[sel]), 1)[0])


class AllanDeviation(BaseEstimator):
    """Estimator wrapper: ``fit`` computes the curve for a fractional-frequency stream.

    Attributes after fit: ``curve_``, ``taus_``, ``sigmas_``, ``counts_``.
    """

    def __init__(self, taus=None, rate=None, overlapping=False):
        self.taus = taus
        self.rate = rate
        self.overlapping = overlapping

    def fit(self, X, y=None):
        self.curve_ = allan_deviation(X, self.taus, self.rate, self.overlapping)
        self.taus_ = self.curve_.taus
        self.sigmas_ = self.curve_.sigmas
        self.counts_ = self.curve_.counts
        return self


# --------------------------------------------------------------------------
# frequency-domain prediction


def _gl_nodes(edges):
    # Gauss-Legendre nodes/weights on consecutive intervals given by edges
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2
    x = (lo + hi) / 2 + half * _GL_X
    w = half * _GL_W
    return x.ravel(), w.ravel()


def _log_edges(lo, hi, per_decade):
    n = max(int(math.ceil(per_decade * math.log10(hi / lo))), 1)
    return np.geomspace(lo, hi, n + 1)


def allan_from_psd(psd, taus, omega_max=None, omega_min=None, periods=400):
    """Allan deviation from a fractional-frequency PSD ``psd(w)``.

    Evaluates ``(8 / (2 pi tau^2)) * int sin^4(w tau / 2) / w^2 * S(w) dw``
    over ``[omega_min, omega_max]`` (defaults: ``2 pi 1e-2 / max(taus)`` and
    infinity). With ``u = w tau / 2`` the first ``periods`` periods of
    ``sin^4 u`` are integrated with 24-point Gauss-Legendre per half period.
    Beyond that ``sin^4`` is replaced by its mean 3/8 plus the exact
    integration-by-parts boundary term at the upper limit; the neglected
    remainder is of order ``|d/du (S/u^2)|``, below 1e-6 relative for the
    spectra used here. ``psd`` must accept arrays.

    An unlimited upper bound is rejected when ``S`` grows like ``w**1`` or
    faster at high frequency (non-convergent integral).
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if np.any(taus <= 0):
        raise ValueError("taus must be positive")
    if omega_min is None:
        omega_min = 2 * np.pi * 1e-2 / taus.max()
    if omega_max is None:
        probe = np.asarray(psd(np.array([1e8, 1e9])), dtype=float)
        if probe[0] > 0 and probe[1] > 0 and math.log10(probe[1] / probe[0]) >= 1 - 1e-9:
            raise ValueError("PSD grows too fast for an unbounded integral; pass omega_max")
        omega_max = math.inf

    sigmas = []
    for tau in taus:
        u_lo = omega_min * tau / 2
        u_hi = omega_max * tau / 2
        u_osc = periods * math.pi
        total = 0.0
        # low end: log-spaced up to pi, then half-period panels
        top = min(math.pi, u_hi)
        if u_lo < top:
            x, w = _gl_nodes(_log_edges(u_lo, top, 8))
            total += np.sum(w * np.sin(x) ** 4 / x**2 * psd(2 * x / tau))
        if u_hi > math.pi:
            top = min(u_osc, u_hi)
            x, w = _gl_nodes(np.append(np.arange(math.pi, top, math.pi / 2), top))
            total += np.sum(w * np.sin(x) ** 4 / x**2 * psd(2 * x / tau))
        if u_hi > u_osc:
            hi = u_hi if math.isfinite(u_hi) else u_osc * 1e12
            x, w = _gl_nodes(_log_edges(u_osc, hi, 16))
            g = psd(2 * x / tau) / x**2
            total += 0.375 * np.sum(w * g)
            if math.isfinite(u_hi):
                g_hi = float(np.asarray(psd(np.array([omega_max])))[0]) / u_hi**2
                total += g_hi * (-math.sin(2 * u_hi) / 4 + math.sin(4 * u_hi) / 32)
        sigmas.append(math.sqrt(max(total, 0.0) * 2 / (math.pi * tau)))
    return AllanCurve(taus, sigmas)


@dataclass(frozen=True)
class PsdModel:
    """SSO fractional-frequency noise model.

    ``loop_cutoff`` (Hz) is the first-order equivalent of the loop band-pass;
    None means all-pass.
    """

    S_th: float
    K: float
    tau_r: float
    omega_0: float
    loop_cutoff: float | None = None

    def __post_init__(self):
        check_positive(self.S_th, "S_th", include_zero=True)
        check_positive(self.K, "K", include_zero=True)
        check_positive(self.tau_r, "tau_r")
        check_positive(self.omega_0, "omega_0")

    @classmethod
    def from_config(cls, config):
        return cls(config.S_th, config.K, config.tau_r, config.omega_0, config.loop_cutoff)

    @property
    def f_o(self):
        return self.omega_0 / (2 * math.pi)


def loop_gain_sq(model: PsdModel, omega):
    omega = np.asarray(omega, dtype=float)
    if model.loop_cutoff is None:
        return np.ones_like(omega)
    return 1.0 / (1.0 + (omega / (2 * math.pi * model.loop_cutoff)) ** 2)


def thermal_transfer_sq(model: PsdModel, omega):
    """``|H_th(jw)|**2 = |H_L|**2 / tau_r**2``."""
    return loop_gain_sq(model, omega) / model.tau_r**2


def detection_transfer_sq(model: PsdModel, omega):
    """``|H_d(jw)|**2 = |H_L|**2 * (1 + (w tau_r)**2) / tau_r**2`` (inverse resonator pole)."""
    omega = np.asarray(omega, dtype=float)
    return loop_gain_sq(model, omega) * (1.0 + (omega * model.tau_r) ** 2) / model.tau_r**2


def sso_fractional_psd(model: PsdModel, omega):
    """Fractional-frequency PSD of the SSO output, 1/Hz (one-sided)."""
    omega = np.asarray(omega, dtype=float)
    return (model.S_th / model.omega_0**2) * (
        thermal_transfer_sq(model, omega) + model.K**2 * detection_transfer_sq(model, omega)
    )


# --------------------------------------------------------------------------
# counter output prediction
#
# The prediction works in the discrete domain of the stream the Allan
# deviation is computed on. The source spectrum is gated by the counter
# (and the CIC windows), folded into (0, pi / T), passed through the digital
# filters, folded again by any downsampling, and finally integrated against
# the exact block-average kernel of the sampled stream:
#
#   sigma^2(m) = 1 / (pi T) * int_0^pi S(theta / T) sin^4(m theta / 2) / (m^2 sin^2(theta / 2)) d theta
#
# which reduces to the continuous-time kernel for contiguous gates.

_N_ALIAS = 60
_N_UNIFORM = 2**17
_N_LOG = 40000


def _sinc2(x):
    return np.sinc(np.asarray(x) / np.pi) ** 2


def _psd_limit(psd):
    # value of a band-limited PSD at "infinity"; growing spectra cannot be folded
    hi = np.asarray(psd(np.array([1e12, 1e13])), dtype=float)
    if hi[1] > 0 and abs(hi[1] - hi[0]) > 1e-3 * abs(hi[1]):
        raise ValueError("source PSD is not band-limited; the counter gate cannot fold it")
    return float(hi[1])


def _fold_gated(psd, T, extra, omega, identity):
    """Gated source spectrum folded into ``(0, pi / T)`` at ``omega``.

    The gate is ``sinc^2(w T / 2)`` times ``extra(w)``. With ``identity`` the
    flat high-frequency limit of the source is folded exactly through
    ``sum_n sinc^2(x + n pi) = 1`` and only the remainder is summed.
    """
    ws = 2 * math.pi / T
    s_inf = _psd_limit(psd) if identity else 0.0
    total = np.full_like(omega, s_inf)
    for n in range(_N_ALIAS + 1):
        images = [omega + n * ws] + ([n * ws - omega] if n else [])
        for w in images:
            g = _sinc2(w * T / 2)
            if extra is not None:
                g = g * extra(w)
            total += (psd(w) - s_inf) * g
    return total


def _intermod(S, T):
    """Spectrum of ``u**2`` for a Gaussian sequence ``u`` with spectrum ``S``.

    ``S`` is sampled on the uniform grid ``theta = pi j / M``; the
    autocovariance comes from a type-I DCT (trapezoid rule) and
    ``cov(u^2) = 2 R_u^2``.
    """
    from scipy.fft import dct

    M = S.size - 1
    R = dct(S, type=1) / (4 * M * T)
    return 2 * T * dct(2 * R**2, type=1)


def _lowpass1_gain_sq(theta, cutoff, rate):
    from .filters import lowpass1_coefficients

    b, a = lowpass1_coefficients(cutoff, rate)
    c = np.cos(theta)
    return b[0] ** 2 * 2 * (1 + c) / (1 + a[1] ** 2 + 2 * a[1] * c)


def _mavg_gain_sq(theta, w):
    num = np.sin(w * theta / 2)
    den = w * np.sin(theta / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        g = (num / den) ** 2
    return np.where(np.abs(den) < 1e-300, 1.0, g)


def _discrete_allan(theta, S, T, ms, periods=400):
    # block-average kernel on the sampled stream, same panel scheme as allan_from_psd
    def spec(x):
        return np.interp(x, theta, S)

    sig = []
    for m in ms:
        x_lo = max(theta[1] * 1e-3, 1e-12)
        osc = min(2 * math.pi * periods / m, math.pi)
        total = 0.0
        top = min(math.pi / m, osc)
        x, w = _gl_nodes(_log_edges(x_lo, top, 8))
        total += np.sum(w * spec(x) * np.sin(m * x / 2) ** 4 / np.sin(x / 2) ** 2)
        if osc > top:
            x, w = _gl_nodes(np.append(np.arange(top, osc, math.pi / m), osc))
            total += np.sum(w * spec(x) * np.sin(m * x / 2) ** 4 / np.sin(x / 2) ** 2)
        if osc < math.pi:
            # sin^4 replaced by its mean over the fast oscillation
            x, w = _gl_nodes(_log_edges(osc, math.pi, 64))
            total += 0.375 * np.sum(w * spec(x) / np.sin(x / 2) ** 2)
        sig.append(math.sqrt(max(total, 0.0) / (math.pi * T * m * m)))
    return np.array(sig)


def predicted_counter_ad(model, pipeline, taus, f_o=None):
    """Allan deviation of the counter output predicted from a source spectrum.

    ``model`` is a PsdModel or a callable fractional PSD ``S_y(w)`` (then
    ``f_o`` is required). ``pipeline`` is a PipelineConfig. Interpolator
    quantization enters as white time noise of variance ``interp_res**2 / 12``
    per stamp. When conversion precedes filtering, the second-order term of
    the reciprocal conversion adds the spectrum of ``u**2`` (``u`` the
    per-sample fractional deviation), which the following filters cannot
    remove at low frequency.

    Returned taus are the requested ones rounded to whole output samples.
    Event-triggered resampling is not linear time-invariant and is rejected.
    """
    if pipeline.resampling == "event_triggered":
        raise ValueError("no spectral model for event-triggered resampling")
    if isinstance(model, PsdModel):
        psd = lambda w: sso_fractional_psd(model, w)  # noqa: E731
        f_o = model.f_o if f_o is None else f_o
    elif callable(model):
        psd = model
        if f_o is None:
            raise ValueError("f_o is required with a callable PSD")
    else:
        raise TypeError("model must be a PsdModel or a callable PSD")
    check_positive(f_o, "f_o")
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size == 0 or np.any(taus <= 0):
        raise ValueError("taus must be positive")

    q2 = pipeline.interp_res**2 / 12.0
    hold = pipeline.k / f_o
    if pipeline.resampling == "cic":
        T = pipeline.cic.R / pipeline.cic.f_clk
        L = pipeline.cic.N * T
        extra = lambda w: _sinc2(w * L / 2) ** pipeline.cic.order * _sinc2(w * hold / 2)  # noqa: E731
        src = lambda w: psd(w) + 2 * q2 * hold * w**2 * (w < math.pi / hold)  # noqa: E731
        identity = False
    else:
        T, extra, src, identity = hold, None, psd, True
    D = pipeline.downsample or 1
    T_out = D * T

    ms = np.maximum(np.rint(taus / T_out).astype(np.int64), 1)
    th_lo = 2 * math.pi * 1e-2 / (ms.max() * D) / 10
    uniform = np.linspace(0.0, math.pi, _N_UNIFORM + 1)
    theta = np.union1d(uniform, np.geomspace(th_lo, math.pi, _N_LOG))

    def linear(th):
        S = _fold_gated(src, T, extra, th / T, identity)
        if extra is None:
            # white stamp time noise differenced over one sample
            S = S + 8 * q2 / T * np.sin(th / 2) ** 2
        return S

    S = linear(theta)
    if pipeline.conversion_placement == "before_filter":
        S = S + np.interp(theta, uniform, _intermod(linear(uniform), T))
    if pipeline.mavg_window is not None:
        S = S * _mavg_gain_sq(theta, pipeline.mavg_window)
    if pipeline.lpf is not None:
        S = S * _lowpass1_gain_sq(theta, pipeline.lpf.cutoff, 1.0 / T)
    if D > 1:
        # keeping every D-th sample folds D images of the band onto (0, pi)
        folded = np.interp(theta / D, theta, S)
        for n in range(1, D + 1):
            for img in (theta + 2 * math.pi * n) / D, (2 * math.pi * n - theta) / D:
                ok = img <= math.pi
                folded[ok] += np.interp(img[ok], theta, S)
        S = folded
    sig = _discrete_allan(theta, S, T_out, ms)
    return AllanCurve(ms * T_out, sig)
