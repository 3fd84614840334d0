"""Shared fixtures.

Simulations in the suite run at 16 samples per nominal cycle (the minimum
the signal model accepts) instead of the library default of 64, which keeps
the full suite within a few minutes. Edge-time interpolation error at 16x is
far below the 100 ps interpolator grid, so no result depends on it.
"""

from dataclasses import replace

import numpy as np
import pytest

from freqcounter.config import default_config
from freqcounter.signal_model import NoiseConfig, synthesize_timestamps

OVERSAMPLE = 16
ACCEPTANCE_LINES = []


def fast_config(name, duration=10.0, **noise):
    cfg = default_config(name, duration=duration)
    return replace(cfg, noise=replace(cfg.noise, oversample=OVERSAMPLE, **noise))


@pytest.fixture(scope="session")
def default_noise():
    return NoiseConfig(oversample=OVERSAMPLE)


@pytest.fixture(scope="session")
def default_stamps(default_noise):
    return synthesize_timestamps(default_noise, 2.0, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def record_acceptance(line):
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
