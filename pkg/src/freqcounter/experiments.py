"""Experiment orchestration and result export.

Each experiment synthesizes one oscillator record and passes it through
several processing legs, so the legs differ only in processing and their
curves can be compared directly. The record's random stream is derived from
``(seed, experiment, "source")``; nothing depends on execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import subprocess
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ExperimentConfig, default_config, load_config, config_from_dict
from .pipeline import PipelineConfig, run_pipeline
from .pll import closed_loop_bandwidth, phase_from_timestamps, pll_track, predicted_pll_ad
from .series import AllanCurve
from .signal_model import synthesize_timestamps
from .stability import (
    PsdModel,
    allan_deviation_timed,
    allan_from_blocks,
    predicted_counter_ad,
    sso_fractional_psd,
)


@dataclass(frozen=True)
class ExperimentResult:
    label: str
    curve: AllanCurve
    metadata: dict = field(default_factory=dict)


class ExportError(OSError):
    pass


def leg_seed(seed, *labels):
    """Stable 64-bit seed from the master seed and a leg label."""
    digest = hashlib.sha256("/".join([str(int(seed)), *labels]).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def tau_grid(tau_min, tau_max):
    """1-2-5 series covering ``[tau_min, tau_max]``."""
    if not 0 < tau_min <= tau_max:
        raise ValueError("need 0 < tau_min <= tau_max")
    out = []
    for dec in range(math.floor(math.log10(tau_min)) - 1, math.ceil(math.log10(tau_max)) + 1):
        for mant in (1, 2, 5):
            t = mant * 10.0**dec
            if tau_min * (1 - 1e-9) <= t <= tau_max * (1 + 1e-9):
                out.append(float(f"{t:.12g}"))
    return np.array(out)


def _versions():
    import numpy
    import scipy
    import sklearn

    try:
        from importlib.metadata import version

        pkg = version("artifact")
    except Exception:  # not installed as a distribution
        pkg = "unknown"
    return {"artifact": pkg, "numpy": numpy.__version__, "scipy": scipy.__version__, "scikit-learn": sklearn.__version__}


def _git_revision():
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "rev-parse", "HEAD"], cwd=here, capture_output=True, text=True, timeout=10, check=True
        )
        return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def _pipelines(cfg: ExperimentConfig):
    c = cfg.counter
    base = dict(f_clk=c.f_clk, interp_res=c.interp_res, R=c.R, N=c.N, settle_time=cfg.analysis.settle_time)
    return {
        "raw": PipelineConfig.build(**base),
        "lpf-stamp": PipelineConfig.build(lpf_cutoff=c.lpf_cutoff, **base),
        "lpf-frequency": PipelineConfig.build(lpf_cutoff=c.lpf_cutoff, conversion_placement="before_filter", **base),
        "cic-lpf": PipelineConfig.build(lpf_cutoff=c.lpf_cutoff, resampling="cic", **base),
        "event-lpf": PipelineConfig.build(
            lpf_cutoff=c.lpf_cutoff, resampling="event_triggered", conversion_placement="before_filter", T_int=c.T_int, **base
        ),
    }


def _source(cfg: ExperimentConfig):
    return synthesize_timestamps(
        cfg.noise, cfg.duration, seed=leg_seed(cfg.seed, cfg.experiment, "source"), max_samples=cfg.budget.max_samples
    )


def _timed(outputs, grid, taus, f_nom):
    # every leg is evaluated over the same edges, from the latest leg start on
    t_start = max(o.times[0] for o in outputs.values())
    t_end = min(o.times[-1] for o in outputs.values())
    grid = grid[grid <= t_end]
    span = t_end - t_start
    taus = taus[taus <= span / 2]
    return {k: allan_deviation_timed(o, taus, f_nom, grid=grid, t_start=t_start) for k, o in outputs.items()}


def _blocks(series, ms, f_nom):
    # taus here are block sizes times the mean output spacing of the leg
    y = series.values / f_nom - 1.0
    ms = [m for m in ms if y.size // m >= 2]
    return allan_from_blocks(y, ms, series.mean_rate)


def _run_filter_placement(cfg, ts, theory):
    p = _pipelines(cfg)
    legs = {"raw": p["raw"], "frequency-filtered": p["lpf-frequency"], "stamp-filtered": p["lpf-stamp"]}
    outputs = {k: run_pipeline(ts, v) for k, v in legs.items()}
    taus = tau_grid(cfg.analysis.tau_min, cfg.tau_max)
    curves = _timed(outputs, outputs["raw"].times, taus, cfg.noise.f_o)
    meta = {k: {"pipeline": v.to_dict()} for k, v in legs.items()}
    if theory:
        model = PsdModel.from_config(cfg.noise)
        for k in ("frequency-filtered", "stamp-filtered"):
            curves[f"theory {k}"] = predicted_counter_ad(model, legs[k], curves[k].taus)
            meta[f"theory {k}"] = {"pipeline": legs[k].to_dict(), "model": "predicted_counter_ad"}
    return curves, meta


def _gate_blocks(cfg, block_taus, kmax):
    # block sizes in units of the longest gate, so every k shares identical taus
    unit = kmax / cfg.noise.f_o
    js = sorted({max(int(round(t / unit)), 1) for t in block_taus})
    return js


def _run_gate_sweep(cfg, ts, theory):
    c = cfg.counter
    ks = c.k_values
    kmax = max(ks)
    js = _gate_blocks(cfg, tau_grid(max(cfg.analysis.tau_min, kmax / cfg.noise.f_o), cfg.tau_max), kmax)
    curves, meta = {}, {}
    for k in ks:
        pc = PipelineConfig.build(k=k, f_clk=c.f_clk, interp_res=c.interp_res, R=c.R, N=c.N)
        out = run_pipeline(ts, pc)
        ms = [max(int(round(j * kmax / k)), 1) for j in js]
        curves[f"k={k}"] = _blocks(out, ms, cfg.noise.f_o)
        meta[f"k={k}"] = {"pipeline": pc.to_dict()}
    if theory:
        pc = PipelineConfig.build(k=kmax, f_clk=c.f_clk, interp_res=c.interp_res)
        curves["theory"] = predicted_counter_ad(PsdModel.from_config(cfg.noise), pc, curves[f"k={kmax}"].taus)
        meta["theory"] = {"pipeline": pc.to_dict(), "model": "predicted_counter_ad"}
    return curves, meta


def _run_mavg(cfg, ts, theory):
    c = cfg.counter
    w = c.mavg_window
    common = dict(f_clk=c.f_clk, interp_res=c.interp_res, R=c.R, N=c.N)
    legs = {
        "raw k=1": PipelineConfig.build(**common),
        f"divided k={w}": PipelineConfig.build(k=w, **common),
        f"mavg {w}": PipelineConfig.build(mavg_window=w, **common),
        f"mavg {w} downsampled": PipelineConfig.build(mavg_window=w, downsample=w, **common),
    }
    js = _gate_blocks(cfg, tau_grid(max(cfg.analysis.tau_min, w / cfg.noise.f_o), cfg.tau_max), w)
    scale = {"raw k=1": w, f"divided k={w}": 1, f"mavg {w}": w, f"mavg {w} downsampled": 1}
    curves, meta = {}, {}
    for label, pc in legs.items():
        out = run_pipeline(ts, pc)
        curves[label] = _blocks(out, [j * scale[label] for j in js], cfg.noise.f_o)
        meta[label] = {"pipeline": pc.to_dict()}
    if theory:
        model = PsdModel.from_config(cfg.noise)
        for label in (f"divided k={w}", f"mavg {w}"):
            curves[f"theory {label}"] = predicted_counter_ad(model, legs[label], curves[label].taus)
            meta[f"theory {label}"] = {"pipeline": legs[label].to_dict(), "model": "predicted_counter_ad"}
    return curves, meta


def _run_resampling(cfg, ts, theory):
    p = _pipelines(cfg)
    legs = {"raw+LPF": p["lpf-stamp"], "CIC+LPF": p["cic-lpf"], "event-triggered+LPF": p["event-lpf"]}
    outputs = {k: run_pipeline(ts, v) for k, v in legs.items()}
    taus = tau_grid(cfg.analysis.tau_min, cfg.tau_max)
    curves = _timed(outputs, outputs["CIC+LPF"].times, taus, cfg.noise.f_o)
    meta = {k: {"pipeline": v.to_dict(), "edge_grid": "CIC+LPF output instants"} for k, v in legs.items()}
    if theory:
        model = PsdModel.from_config(cfg.noise)
        for k in ("raw+LPF", "CIC+LPF"):
            curves[f"theory {k}"] = predicted_counter_ad(model, legs[k], curves[k].taus)
            meta[f"theory {k}"] = {"pipeline": legs[k].to_dict(), "model": "predicted_counter_ad"}
    return curves, meta


def pll_settle_time(cfg: ExperimentConfig):
    if cfg.analysis.settle_time is not None:
        return cfg.analysis.settle_time
    return 10.0 / (2 * math.pi * closed_loop_bandwidth(cfg.pll))


def _run_pll(cfg, ts, theory):
    p = _pipelines(cfg)
    counter = run_pipeline(ts, p["cic-lpf"])
    phase, f_ref = phase_from_timestamps(ts, cfg.pll.rate)
    track = pll_track(phase, cfg.pll, f_ref)
    keep = track.times >= ts.times[0] + pll_settle_time(cfg)
    track = type(track)(track.times[keep], track.values[keep], k=track.k)
    outputs = {"counter CIC+LPF": counter, "PLL": track}
    taus = tau_grid(cfg.analysis.tau_min, cfg.tau_max)
    curves = _timed(outputs, counter.times, taus, cfg.noise.f_o)
    meta = {
        "counter CIC+LPF": {"pipeline": p["cic-lpf"].to_dict()},
        "PLL": {"pll": cfg.pll.to_dict(), "bandwidth_hz": closed_loop_bandwidth(cfg.pll)},
    }
    if theory:
        model = PsdModel.from_config(cfg.noise)
        curves["theory counter"] = predicted_counter_ad(model, p["cic-lpf"], curves["counter CIC+LPF"].taus)
        meta["theory counter"] = {"pipeline": p["cic-lpf"].to_dict(), "model": "predicted_counter_ad"}
        curves["theory PLL"] = predicted_pll_ad(lambda w: sso_fractional_psd(model, w), cfg.pll, curves["PLL"].taus)
        meta["theory PLL"] = {"pll": cfg.pll.to_dict(), "model": "predicted_pll_ad"}
    return curves, meta


_RUNNERS = {
    "filter-placement": _run_filter_placement,
    "gate-sweep": _run_gate_sweep,
    "mavg-emulation": _run_mavg,
    "resampling": _run_resampling,
    "pll-compare": _run_pll,
}


def resolve_config(name, config=None, seed=None, duration=None) -> ExperimentConfig:
    """Merge defaults, a config (object, mapping or YAML path) and CLI overrides."""
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    if config is None:
        cfg = default_config(name)
    elif isinstance(config, ExperimentConfig):
        cfg = config
    elif isinstance(config, dict):
        cfg = config_from_dict(config, experiment=name)
    else:
        cfg = load_config(config, experiment=name)
    if cfg.experiment != name:
        raise ValueError(f"configuration is for {cfg.experiment!r}, not {name!r}")
    if seed is not None:
        cfg = replace(cfg, seed=int(seed))
    if duration is not None:
        cfg = replace(cfg, duration=float(duration))
    return cfg


def _results(cfg, curves, meta):
    base = {"experiment": cfg.experiment, "seed": cfg.seed, "config": cfg.to_dict(), "versions": _versions()}
    return [ExperimentResult(label, curve, {**base, "label": label, **meta.get(label, {})}) for label, curve in curves.items()]


def run_experiment(name, config=None, seed=None, duration=None, theory=True):
    """Run one experiment and return one ExperimentResult per curve.

    ``config`` may be an ExperimentConfig, a mapping in the file schema, or
    a path to a YAML file; ``seed`` and ``duration`` override it.
    """
    cfg = resolve_config(name, config, seed, duration)
    ts = _source(cfg)
    curves, meta = _RUNNERS[name](cfg, ts, theory)
    return _results(cfg, curves, meta)


def predict_experiment(name, config=None, duration=None):
    """Theory curves only (no simulation) on the experiment's tau grid."""
    cfg = resolve_config(name, config, None, duration)
    model = PsdModel.from_config(cfg.noise)
    p = _pipelines(cfg)
    taus = tau_grid(cfg.analysis.tau_min, cfg.tau_max)
    legs = {
        "filter-placement": {"frequency-filtered": p["lpf-frequency"], "stamp-filtered": p["lpf-stamp"]},
        "gate-sweep": {f"k={k}": PipelineConfig.build(k=k, interp_res=cfg.counter.interp_res) for k in cfg.counter.k_values},
        "mavg-emulation": {
            f"divided k={cfg.counter.mavg_window}": PipelineConfig.build(k=cfg.counter.mavg_window, interp_res=cfg.counter.interp_res),
            f"mavg {cfg.counter.mavg_window}": PipelineConfig.build(mavg_window=cfg.counter.mavg_window, interp_res=cfg.counter.interp_res),
        },
        "resampling": {"raw+LPF": p["lpf-stamp"], "CIC+LPF": p["cic-lpf"]},
        "pll-compare": {"counter CIC+LPF": p["cic-lpf"]},
    }[name]
    curves, meta = {}, {}
    for label, pc in legs.items():
        curves[f"theory {label}"] = predicted_counter_ad(model, pc, taus)
        meta[f"theory {label}"] = {"pipeline": pc.to_dict(), "model": "predicted_counter_ad"}
    if name == "pll-compare":
        curves["theory PLL"] = predicted_pll_ad(lambda w: sso_fractional_psd(model, w), cfg.pll, taus)
        meta["theory PLL"] = {"pll": cfg.pll.to_dict(), "model": "predicted_pll_ad"}
    return _results(cfg, curves, meta)


# --------------------------------------------------------------------------
# export


def slug(label):
    s = re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-")
    return s or "curve"


def _num(x):
    return repr(float(x))


def curve_csv(curve: AllanCurve) -> str:
    lines = ["tau_s,sigma_y,count"]
    for t, s, c in zip(curve.taus, curve.sigmas, curve.counts):
        lines.append(f"{_num(t)},{_num(s)},{int(c)}")
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def _write(path: Path, text: str):
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc.strerror or exc}") from exc


def export(results, path, git_revision=None):
    """Write one CSV per curve plus ``metadata.json`` into directory ``path``.

    Output depends only on the results (and the repository revision), so a
    re-export of the same inputs is byte-identical. Returns the written paths.
    """
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {out}: {exc.strerror or exc}") from exc
    written, curves = [], []
    used = set()
    run = {}
    for res in results:
        name = slug(res.label)
        base, n = name, 2
        while name in used:
            name, n = f"{base}-{n}", n + 1
        used.add(name)
        target = out / f"{name}.csv"
        _write(target, curve_csv(res.curve))
        written.append(target)
        md = dict(res.metadata)
        for key in ("experiment", "seed", "config", "versions"):
            if key in md:
                run.setdefault(key, md.pop(key))
        curves.append({"label": res.label, "file": target.name, **md})
    doc = {
        **run,
        "git_revision": _git_revision() if git_revision is None else git_revision,
        "curves": curves,
    }
    meta_path = out / "metadata.json"
    _write(meta_path, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    written.append(meta_path)
    return written
