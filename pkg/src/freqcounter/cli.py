"""Command-line entry point.

    freqcounter run <experiment> [--config FILE] [--seed N] [--duration S] [--out DIR]
    freqcounter ad <csv-in> [--out FILE] [--f-nom HZ] [--tau-min S] [--tau-max S]
    freqcounter predict <config> [--duration S] [--out DIR]

On success the written files are listed as JSON on stdout and the exit code
is 0. On failure a JSON object ``{"errors": [{"location", "message"}, ...]}``
goes to stderr and the exit code is 1 (2 for command-line usage errors).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import ExportError, curve_csv, export, predict_experiment, run_experiment, tau_grid
from .series import FrequencySeries
from .signal_model import SampleBudgetError
from .stability import allan_deviation_timed


def _parser():
    p = argparse.ArgumentParser(prog="freqcounter", description="Frequency counter simulation and Allan deviation tools")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and export its curves")
    run.add_argument("experiment", choices=EXPERIMENTS)
    run.add_argument("--config", help="YAML configuration file")
    run.add_argument("--seed", type=int)
    run.add_argument("--duration", type=float, help="record length in seconds")
    run.add_argument("--out", help="output directory (default: results/<experiment>)")

    ad = sub.add_parser("ad", help="Allan deviation of a frequency record (CSV: time_s,frequency_hz)")
    ad.add_argument("csv_in")
    ad.add_argument("--out", help="output CSV (default: stdout)")
    ad.add_argument("--f-nom", type=float, help="nominal frequency in Hz (default: record mean)")
    ad.add_argument("--tau-min", type=float)
    ad.add_argument("--tau-max", type=float)

    pr = sub.add_parser("predict", help="theory curves for the experiment described by a config file")
    pr.add_argument("config")
    pr.add_argument("--duration", type=float)
    pr.add_argument("--out", help="output directory (default: results/<experiment>-theory)")
    return p


def _fail(errors, code=1):
    json.dump({"errors": errors}, sys.stderr, indent=2)
    sys.stderr.write("\n")
    return code


def read_frequency_csv(path):
    """Two-column CSV with a header: time in seconds, frequency in Hz."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError([{"location": str(path), "message": exc.strerror or str(exc)}]) from exc
    if len(rows) < 2:
        raise ConfigError([{"location": str(path), "message": "expected a header and at least four data rows"}])
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            data.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            raise ConfigError([{"location": f"{path}:{i}", "message": f"expected two numbers, got {row!r}"}]) from None
    arr = np.array(data)
    if arr.shape[0] < 4:
        raise ConfigError([{"location": str(path), "message": "need at least four samples"}])
    try:
        return FrequencySeries(arr[:, 0], arr[:, 1])
    except ValueError as exc:
        raise ConfigError([{"location": str(path), "message": str(exc)}]) from exc


def _cmd_ad(args):
    series = read_frequency_csv(args.csv_in)
    f_nom = args.f_nom if args.f_nom is not None else float(np.mean(series.values))
    dt = float(np.median(np.diff(series.times)))
    span = series.times[-1] - series.times[0]
    tau_min = args.tau_min or dt
    tau_max = args.tau_max or max(span / 10, tau_min)
    taus = tau_grid(tau_min, tau_max)
    if taus.size == 0:
        raise ConfigError([{"location": "--tau-min/--tau-max", "message": "no 1-2-5 tau inside the range"}])
    curve = allan_deviation_timed(series, taus, f_nom)
    text = curve_csv(curve)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ExportError(f"cannot write {args.out}: {exc.strerror or exc}") from exc
        json.dump({"files": [args.out]}, sys.stdout)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            results = run_experiment(args.experiment, args.config, seed=args.seed, duration=args.duration)
            files = export(results, args.out or Path("results") / args.experiment)
        elif args.command == "predict":
            cfg = load_config(args.config)
            results = predict_experiment(cfg.experiment, cfg, duration=args.duration)
            files = export(results, args.out or Path("results") / f"{cfg.experiment}-theory")
        else:
            _cmd_ad(args)
            return 0
    except ConfigError as exc:
        return _fail(exc.errors)
    except SampleBudgetError as exc:
        return _fail([{"location": "budget.max_samples", "message": str(exc)}])
    except ExportError as exc:
        return _fail([{"location": "export", "message": str(exc)}])
    except (ValueError, RuntimeError) as exc:
        return _fail([{"location": args.command, "message": str(exc)}])
    json.dump({"files": [str(f) for f in files]}, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
