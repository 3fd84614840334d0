import math

import numpy as np
import pytest
from scipy import optimize, signal

from freqcounter.signal_model import (
    NoiseConfig,
    PhaseTrajectory,
    SampleBudgetError,
    extract_timestamps,
    resonator_time_constant,
    synthesize_phase,
    synthesize_timestamps,
)
from freqcounter.stability import PsdModel, sso_fractional_psd


@pytest.mark.parametrize(
    "Q, f_o, expected, rel",
    [(57.5e3, 119e3, 0.154, 2e-3), (math.pi, 1.0, 1.0, 1e-12), (57.5e3, 238e3, 0.0769, 1e-3)],
)
def test_resonator_time_constant(Q, f_o, expected, rel):
    cfg = NoiseConfig(f_o=f_o, Q=Q, oversample=16)
    assert resonator_time_constant(cfg) == pytest.approx(expected, rel=rel)
    assert cfg.tau_r == resonator_time_constant(cfg)


@pytest.mark.parametrize(
    "kwargs",
    [dict(f_o=0), dict(Q=-1), dict(K=-0.1), dict(bpf_bandwidth=0), dict(oversample=8), dict(S_th=-1)],
)
def test_noise_config_rejects_invalid(kwargs):
    with pytest.raises(ValueError):
        NoiseConfig(**kwargs)


def test_noiseless_phase_is_exact_ramp():
    cfg = NoiseConfig(S_th=0.0, K=0.0, oversample=16)
    traj = synthesize_phase(cfg, 2e-3, seed=3)
    assert np.all(traj.alpha == 0)
    np.testing.assert_array_equal(traj.phase, cfg.f_o * traj.times)
    ts = extract_timestamps(traj)
    n = ts.cycles
    np.testing.assert_allclose(ts.times, n / 119e3, rtol=0, atol=1e-12)


def test_constant_time_offset_shifts_stamps():
    f_o, fs, c = 119e3, 16 * 119e3, 2.5e-7
    t = np.arange(4000) / fs
    traj = PhaseTrajectory(fs, f_o * (t + c), np.full(t.size, c), f_o)
    ts = extract_timestamps(traj)
    np.testing.assert_allclose(ts.times, ts.cycles / f_o - c, rtol=0, atol=1e-12)


def test_edge_times_match_root_finding_oracle():
    # smooth alpha with a known closed form; the oracle root-finds phi(t) = n directly
    f_o, fs = 119e3, 16 * 119e3
    T_o = 1 / f_o

    def alpha(t):
        return 3e-7 * np.sin(2 * np.pi * 3e3 * t) + 1e-7 * np.cos(2 * np.pi * 11e3 * t + 0.3)

    t = np.arange(3000) / fs
    traj = PhaseTrajectory(fs, f_o * (t + alpha(t)), alpha(t), f_o)
    ts = extract_timestamps(traj)
    worst = 0.0
    for n, tn in zip(ts.cycles[::7], ts.times[::7]):
        root = optimize.brentq(lambda x: f_o * (x + alpha(x)) - n, tn - T_o / 2, tn + T_o / 2, xtol=1e-16)
        worst = max(worst, abs(root - tn))
    assert worst < 0.01 * T_o
    # documented quadratic bound: h^2 max|dy/dt| / (8 min y)
    h = 1 / fs
    tt = np.linspace(0, t[-1], 200001)
    y = 1 + np.gradient(alpha(tt), tt)
    bound = h**2 * np.max(np.abs(np.gradient(y, tt))) / (8 * y.min())
    assert worst <= bound * 1.05


def test_non_monotonic_phase_rejected():
    traj = PhaseTrajectory(10.0, np.array([0.0, 0.5, 0.4, 1.2]), np.zeros(4), 1.0)
    with pytest.raises(ValueError, match="strictly increasing"):
        extract_timestamps(traj)


def test_synthesis_deterministic_per_seed(default_noise):
    a = synthesize_phase(default_noise, 0.01, seed=5)
    b = synthesize_phase(default_noise, 0.01, seed=5)
    c = synthesize_phase(default_noise, 0.01, seed=6)
    assert a.phase.tobytes() == b.phase.tobytes()
    assert not np.array_equal(a.alpha, c.alpha)


def test_streaming_stamps_match_one_shot_extraction(default_noise):
    one = extract_timestamps(synthesize_phase(default_noise, 0.02, seed=9))
    streamed = synthesize_timestamps(default_noise, 0.02, seed=9, chunk=1000)
    assert streamed.first_cycle == one.first_cycle
    np.testing.assert_array_equal(streamed.times, one.times)


def test_sample_budget_and_minimum_duration(default_noise):
    with pytest.raises(SampleBudgetError):
        synthesize_phase(default_noise, 1.0, max_samples=1000)
    with pytest.raises(ValueError, match="100 nominal cycles"):
        synthesize_phase(default_noise, 50 / 119e3)


def test_stamp_count_within_frequency_bounds(default_noise):
    traj = synthesize_phase(default_noise, 0.05, seed=2)
    ts = extract_timestamps(traj)
    y = traj.fractional_frequency()
    D = traj.times[-1] - traj.times[0]
    f_min, f_max = default_noise.f_o * (1 + y.min()), default_noise.f_o * (1 + y.max())
    assert math.floor(D * f_min) <= len(ts) <= math.ceil(D * f_max) + 1


def _welch_y(cfg, duration, seed, nperseg_s):
    traj = synthesize_phase(cfg, duration, seed=seed)
    y = traj.fractional_frequency()
    # average blocks of 16 samples (a gentle low-pass) before the periodogram
    dec = 16
    y = y[: y.size // dec * dec].reshape(-1, dec).mean(axis=1)
    fs = cfg.sample_rate / dec
    f, p = signal.welch(y, fs=fs, nperseg=int(nperseg_s * fs), detrend=False)
    return f, p


@pytest.mark.slow
def test_thermal_only_psd_is_flat_at_model_level():
    cfg = NoiseConfig(K=0.0, bpf_bandwidth=math.inf, oversample=16)
    f, p = _welch_y(cfg, 2.0, seed=1, nperseg_s=0.01)
    band = (f > 200) & (f < 5e3)
    level = cfg.S_th / (cfg.omega_0**2 * cfg.tau_r**2)
    ratio_db = 10 * np.log10(p[band] / level)
    assert np.all(np.abs(ratio_db) < 3.0)


@pytest.mark.slow
def test_detection_dominated_psd_rises_as_omega_squared():
    cfg = NoiseConfig(S_th=2e-13, K=1000.0, bpf_bandwidth=20e3, oversample=16)
    f, p = _welch_y(cfg, 1.0, seed=2, nperseg_s=0.01)
    band = (f >= 300) & (f <= 3e3)
    slope = np.polyfit(np.log(f[band]), np.log(p[band]), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.2)


@pytest.mark.slow
def test_default_source_psd_matches_model_within_3db():
    # desk-scale version: 10 Hz lower edge so that 100 segments fit in 10 s
    cfg = NoiseConfig(oversample=16)
    f, p = _welch_y(cfg, 10.0, seed=4, nperseg_s=0.1)
    band = (f >= 10) & (f <= cfg.bpf_bandwidth / 2)
    model = sso_fractional_psd(PsdModel.from_config(cfg), 2 * np.pi * f[band])
    assert np.all(np.abs(10 * np.log10(p[band] / model)) < 3.0)
