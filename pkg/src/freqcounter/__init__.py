"""Simulation of a self-sustaining oscillator read out by an interpolating
reciprocal frequency counter, with Allan-deviation estimation, spectral
prediction and a PLL reference detector."""

from .config import ConfigError, ExperimentConfig, default_config, load_config
from .counter import (
    GateDivider,
    IdealConverter,
    QuantizationError,
    ReciprocalConverter,
    StampQuantizer,
    divide,
    quantize,
    to_frequency_ideal,
    to_frequency_reciprocal,
)
from .experiments import ExperimentResult, export, predict_experiment, run_experiment
from .filters import FilterSpec, LowPassFilter, MovingAverage, Downsampler, downsample, lowpass1, moving_average
from .pipeline import FrequencyCounter, PipelineConfig, run_pipeline
from .pll import PLLFrequencyDetector, PllConfig, PllUnstableError, closed_loop_bandwidth, pll_track
from .resample import (
    CicConfig,
    EventTriggeredSampler,
    SignalLostError,
    ZohCicResampler,
    cic_decimate,
    event_triggered_resample,
    zoh_cic_decimate,
    zoh_upsample,
)
from .series import AllanCurve, FrequencySeries, TimestampSeries, UniformSeries
from .signal_model import (
    NoiseConfig,
    SampleBudgetError,
    extract_timestamps,
    resonator_time_constant,
    synthesize_phase,
    synthesize_timestamps,
)
from .stability import (
    AllanDeviation,
    PsdModel,
    allan_deviation,
    allan_deviation_timed,
    allan_from_psd,
    predicted_counter_ad,
    sso_fractional_psd,
)

__version__ = "0.1.0"

__all__ = [
    "allan_deviation",
    "allan_deviation_timed",
    "allan_from_psd",
    "AllanCurve",
    "AllanDeviation",
    "cic_decimate",
    "CicConfig",
    "closed_loop_bandwidth",
    "ConfigError",
    "default_config",
    "divide",
    "downsample",
    "Downsampler",
    "event_triggered_resample",
    "EventTriggeredSampler",
    "ExperimentConfig",
    "ExperimentResult",
    "export",
    "extract_timestamps",
    "FilterSpec",
    "FrequencyCounter",
    "FrequencySeries",
    "GateDivider",
    "IdealConverter",
    "load_config",
    "lowpass1",
    "LowPassFilter",
    "moving_average",
    "MovingAverage",
    "NoiseConfig",
    "PipelineConfig",
    "pll_track",
    "PllConfig",
    "PLLFrequencyDetector",
    "PllUnstableError",
    "predict_experiment",
    "predicted_counter_ad",
    "PsdModel",
    "QuantizationError",
    "quantize",
    "ReciprocalConverter",
    "resonator_time_constant",
    "run_experiment",
    "run_pipeline",
    "SampleBudgetError",
    "SignalLostError",
    "sso_fractional_psd",
    "StampQuantizer",
    "synthesize_phase",
    "synthesize_timestamps",
    "TimestampSeries",
    "to_frequency_ideal",
    "to_frequency_reciprocal",
    "UniformSeries",
    "zoh_cic_decimate",
    "zoh_upsample",
    "ZohCicResampler",
]
