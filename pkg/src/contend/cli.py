"""Experiment orchestration: seeded multi-trial runs, sweeps, attacks, analysis.

Subcommands:
  run      execute the config's trials at one horizon, write a per-trial CSV
  sweep    run every horizon in the config, write an aggregate CSV as well
  attack   run a named attack workload against a target protocol
  analyze  classify and summarize a saved trace file

A single JSON config file fully determines every trial: trial i runs with
seed base_seed + i, no timestamps are emitted, and all CSV columns are
fixed and carry a schema_version, so reruns are byte-identical.

Config schema (all keys optional unless noted):
  {
    "protocol":  {"name": "three_phase" | "bexp" | "batch" | "fixed", ...},
    "adversary": {"name": "none" | "random_jam" | "lemma4" | "theorem3"
                  | "theorem5" | "smooth" | "adaptive_probe", ...},
    "params":    {ParamSet overrides},
    "g":         {rate function spec},          # default constant 16
    "f":         {"kind": "derived"} or a rate function spec,
    "horizons":  [positive ints],               # required
    "trials":    positive int,                  # required
    "seed":      base seed                      # default 0
  }
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .adversaries import ADVERSARY_NAMES
from .analysis import (
    TraceCorruption,
    build_complete_intervals,
    classify_slots,
    success_curve,
    throughput_report,
    truncated_length,
)
from .core import MAX_SEED, ParamSet, RateFunction, eval_f
from .engine import ConfigError, Trace, TraceFormatError, run_trial
from .protocols import PROTOCOL_NAMES

SCHEMA_VERSION = 1

TRIAL_COLUMNS = [
    "schema_version",
    "trial",
    "seed",
    "t",
    "n_t",
    "d_t",
    "active",
    "successes",
    "first_success",
    "bound",
    "satisfied",
    "intervals",
    "max_lbar",
]

AGGREGATE_COLUMNS = [
    "schema_version",
    "horizon",
    "trials",
    "jam_rate",
    "mean_successes",
    "q10_successes",
    "median_successes",
    "q90_successes",
    "mean_active",
    "violation_freq",
    "norm_successes",
]

ATTACK_TARGETS = {
    "bexp": {"name": "bexp"},
    "three_phase": {"name": "three_phase"},
    "batch_data": {"name": "batch", "h": {"kind": "data"}},
    "batch_ctrl": {"name": "batch", "h": {"kind": "ctrl"}},
    "fixed_harmonic": {"name": "fixed", "schedule": {"kind": "harmonic"}},
}


@dataclass
class ExperimentConfig:
    """Validated experiment description; serialized into every output."""

    protocol: dict
    adversary: dict
    params: ParamSet
    f_spec: dict
    g: RateFunction
    horizons: list
    trials: int
    seed: int

    def f(self):
        if self.f_spec.get("kind") == "derived":
            params, g = self.params, self.g
            return lambda x: eval_f(params, g, x)
        return RateFunction.from_spec(self.f_spec)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "adversary": self.adversary,
            "params": self.params.to_dict(),
            "f": self.f_spec,
            "g": self.g.to_spec(),
            "horizons": list(self.horizons),
            "trials": self.trials,
            "seed": self.seed,
        }


def load_config(path: str, seed_override: Optional[int] = None) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return parse_config(raw, seed_override)


def parse_config(raw: dict, seed_override: Optional[int] = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    protocol = raw.get("protocol", {"name": "three_phase"})
    adversary = raw.get("adversary", {"name": "none"})
    if not isinstance(protocol, dict) or protocol.get("name") not in PROTOCOL_NAMES:
        raise ConfigError(f"config protocol must name one of {PROTOCOL_NAMES}")
    if not isinstance(adversary, dict) or adversary.get("name") not in ADVERSARY_NAMES:
        raise ConfigError(f"config adversary must name one of {ADVERSARY_NAMES}")
    try:
        params = ParamSet.from_dict(raw.get("params", {}))
    except ValueError as exc:
        raise ConfigError(f"bad params: {exc}") from None
    try:
        g = RateFunction.from_spec(raw.get("g", {"kind": "constant", "value": 16.0}))
    except ValueError as exc:
        raise ConfigError(f"bad g: {exc}") from None
    f_spec = raw.get("f", {"kind": "derived"})
    if not isinstance(f_spec, dict) or "kind" not in f_spec:
        raise ConfigError("config f must be {'kind': 'derived'} or a rate function spec")
    if f_spec["kind"] != "derived":
        try:
            RateFunction.from_spec(f_spec)
        except ValueError as exc:
            raise ConfigError(f"bad f: {exc}") from None
    horizons = raw.get("horizons")
    if horizons is None and "horizon" in raw:
        horizons = [raw["horizon"]]
    if not isinstance(horizons, list) or not horizons:
        raise ConfigError("config needs a nonempty 'horizons' list")
    if any(not isinstance(h, int) or h < 1 for h in horizons):
        raise ConfigError("every horizon must be a positive integer")
    trials = raw.get("trials")
    if not isinstance(trials, int) or trials < 1:
        raise ConfigError(f"config needs trials >= 1, got {trials!r}")
    seed = seed_override if seed_override is not None else raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    return ExperimentConfig(
        protocol=protocol,
        adversary=adversary,
        params=params,
        f_spec=f_spec,
        g=g,
        horizons=horizons,
        trials=trials,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# trial execution


def trial_row(config_dict: dict, horizon: int, trial: int, trace_path: Optional[str] = None) -> dict:
    """Run trial `trial` of the config at one horizon; returns the CSV row."""
    config = parse_config({**config_dict, "horizons": [horizon]})
    seed = config.seed + trial
    trace = run_trial(
        config.protocol,
        config.adversary,
        horizon,
        seed,
        params=config.params,
        g=config.g,
        f=config.f(),
    )
    if trace_path:
        trace.save(trace_path)
    f, g = config.f(), config.g
    report = throughput_report(trace, horizon, f, g)
    intervals = build_complete_intervals(trace)
    max_lbar = max((truncated_length(iv, config.params, f, g) for iv in intervals), default=0)
    curve = success_curve(trace)
    successes = curve[-1][1] if curve else 0
    first_success = next((slot for slot, total in curve if total > 0), None)
    return {
        "schema_version": SCHEMA_VERSION,
        "trial": trial,
        "seed": seed,
        "t": horizon,
        "n_t": report.n_t,
        "d_t": report.d_t,
        "active": report.active_slots,
        "successes": successes,
        "first_success": "" if first_success is None else first_success,
        "bound": _fmt(report.bound),
        "satisfied": int(report.satisfied),
        "intervals": len(intervals),
        "max_lbar": max_lbar,
    }


def run_horizon(config: ExperimentConfig, horizon: int, workers: int, traces_dir: Optional[str]) -> list:
    """All trial rows for one horizon, in trial order."""
    config_dict = config.to_dict()
    paths = [
        os.path.join(traces_dir, f"trace_h{horizon}_t{trial}.jsonl") if traces_dir else None
        for trial in range(config.trials)
    ]
    if workers <= 1:
        return [trial_row(config_dict, horizon, trial, paths[trial]) for trial in range(config.trials)]
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(trial_row, config_dict, horizon, trial, paths[trial])
            for trial in range(config.trials)
        ]
        return [future.result() for future in futures]


def aggregate_rows(config: ExperimentConfig, horizon: int, rows: list) -> dict:
    successes = np.array([int(r["successes"]) for r in rows], dtype=np.float64)
    active = np.array([int(r["active"]) for r in rows], dtype=np.float64)
    violated = np.array([1 - int(r["satisfied"]) for r in rows], dtype=np.float64)
    norm = horizon / math.log2(horizon) if horizon > 1 else 1.0
    rate = config.adversary.get("rate", 0.0) if config.adversary.get("name") == "random_jam" else ""
    return {
        "schema_version": SCHEMA_VERSION,
        "horizon": horizon,
        "trials": len(rows),
        "jam_rate": _fmt(float(rate)) if rate != "" else "",
        "mean_successes": _fmt(float(np.mean(successes))),
        "q10_successes": _fmt(float(np.quantile(successes, 0.10))),
        "median_successes": _fmt(float(np.quantile(successes, 0.50))),
        "q90_successes": _fmt(float(np.quantile(successes, 0.90))),
        "mean_active": _fmt(float(np.mean(active))),
        "violation_freq": _fmt(float(np.mean(violated))),
        "norm_successes": _fmt(float(np.mean(successes)) / norm),
    }


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    value = float(x)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _write_csv(path: str, columns: list, rows: list) -> None:
    tmp = path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: row[key] for key in columns})
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args) -> int:
    config = load_config(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    traces_dir = None
    if args.emit_traces:
        traces_dir = os.path.join(args.out, "traces")
        os.makedirs(traces_dir, exist_ok=True)
    horizon = args.horizon if args.horizon else config.horizons[0]
    rows = run_horizon(config, horizon, args.workers, traces_dir)
    out_path = os.path.join(args.out, "trials.csv")
    _write_csv(out_path, TRIAL_COLUMNS, rows)
    _write_config_snapshot(args.out, config)
    print(f"wrote {len(rows)} trial rows to {out_path}")
    return 0


def cmd_sweep(args) -> int:
    config = load_config(args.config, args.seed)
    os.makedirs(args.out, exist_ok=True)
    traces_dir = None
    if args.emit_traces:
        traces_dir = os.path.join(args.out, "traces")
        os.makedirs(traces_dir, exist_ok=True)
    aggregates = []
    for horizon in config.horizons:
        rows = run_horizon(config, horizon, args.workers, traces_dir)
        _write_csv(os.path.join(args.out, f"trials_h{horizon}.csv"), TRIAL_COLUMNS, rows)
        aggregates.append(aggregate_rows(config, horizon, rows))
    out_path = os.path.join(args.out, "sweep.csv")
    _write_csv(out_path, AGGREGATE_COLUMNS, aggregates)
    _write_config_snapshot(args.out, config)
    print(f"wrote {len(aggregates)} aggregate rows to {out_path}")
    return 0


def cmd_attack(args) -> int:
    if args.attack == "lemma4":
        adversary = {"name": "lemma4", "x1": args.x1, "h": {"kind": "constant", "value": args.h_const}}
    elif args.attack in ("theorem3", "theorem5"):
        adversary = {"name": args.attack}
    else:
        raise ConfigError(f"unknown attack {args.attack!r}")
    if args.target not in ATTACK_TARGETS:
        raise ConfigError(f"unknown target {args.target!r}; choose from {sorted(ATTACK_TARGETS)}")
    config = parse_config(
        {
            "protocol": ATTACK_TARGETS[args.target],
            "adversary": adversary,
            "horizons": [args.horizon],
            "trials": args.trials,
            "seed": args.seed if args.seed is not None else 0,
        }
    )
    os.makedirs(args.out, exist_ok=True)
    rows = run_horizon(config, args.horizon, args.workers, None)
    _write_csv(os.path.join(args.out, "attack_trials.csv"), TRIAL_COLUMNS, rows)
    first = [int(r["first_success"]) for r in rows if r["first_success"] != ""]
    zero_freq = sum(1 for r in rows if r["first_success"] == "") / len(rows)
    summary = {
        "attack": args.attack,
        "target": args.target,
        "t": args.horizon,
        "trials": args.trials,
        "zero_success_freq": zero_freq,
        "first_success_quantiles": {
            q: float(np.quantile(first, float(q))) for q in ("0.1", "0.5", "0.9")
        }
        if first
        else {},
    }
    summary_path = os.path.join(args.out, "attack_summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_analyze(args) -> int:
    trace = Trace.load(args.trace)
    classes = classify_slots(trace)
    intervals = build_complete_intervals(trace, classes)
    config = trace.config or {}
    params = ParamSet.from_dict(config.get("params", {}))
    g = RateFunction.from_spec(config.get("g", {"kind": "constant", "value": 16.0}))
    f = lambda x: eval_f(params, g, x)  # noqa: E731
    report = throughput_report(trace, trace.horizon, f, g)
    n_begin = sum(c.beginning for c in classes)
    n_end = sum(c.ending for c in classes)
    n_trans = sum(c.transition for c in classes)
    overlap = sum(1 for c in classes if c.beginning and c.ending and c.transition)
    print(f"horizon {trace.horizon}, seed {trace.seed}")
    print(f"slots: {n_begin} beginning, {n_end} ending, {n_trans} transition ({overlap} all three)")
    print(f"active {report.active_slots}, arrivals {report.n_t}, jams {report.d_t}")
    print(f"bound {report.bound:.3f} -> {'satisfied' if report.satisfied else 'VIOLATED'}")
    print(f"complete intervals: {len(intervals)}")
    for iv in intervals[: args.max_intervals]:
        lbar = truncated_length(iv, params, f, g)
        print(f"  [{iv.start}, {iv.end}] {iv.kind}: arrivals {iv.new_arrivals}, jams {iv.jams}, successes {iv.successes}, lbar {lbar}")
    if len(intervals) > args.max_intervals:
        print(f"  ... {len(intervals) - args.max_intervals} more")
    if args.out:
        payload = {
            "horizon": trace.horizon,
            "seed": trace.seed,
            "beginning": n_begin,
            "ending": n_end,
            "transition": n_trans,
            "triple_slots": overlap,
            "active": report.active_slots,
            "n_t": report.n_t,
            "d_t": report.d_t,
            "bound": report.bound,
            "satisfied": report.satisfied,
            "intervals": [
                {
                    "kind": iv.kind,
                    "start": iv.start,
                    "end": iv.end,
                    "new_arrivals": iv.new_arrivals,
                    "jams": iv.jams,
                    "successes": iv.successes,
                    "truncated_length": truncated_length(iv, params, f, g),
                }
                for iv in intervals
            ],
        }
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _write_config_snapshot(out_dir: str, config: ExperimentConfig) -> None:
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contend", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the config's trials at one horizon")
    run_p.add_argument("--config", required=True, help="experiment config JSON")
    run_p.add_argument("--out", default=".", help="output directory")
    run_p.add_argument("--seed", type=int, default=None, help="override the config's base seed")
    run_p.add_argument("--workers", type=int, default=1, help="concurrent trial workers")
    run_p.add_argument("--horizon", type=int, default=None, help="override: run only this horizon")
    run_p.add_argument("--emit-traces", action="store_true", help="write per-trial trace files")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run every horizon in the config")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--out", default=".")
    sweep_p.add_argument("--seed", type=int, default=None)
    sweep_p.add_argument("--workers", type=int, default=1)
    sweep_p.add_argument("--emit-traces", action="store_true")
    sweep_p.set_defaults(func=cmd_sweep)

    attack_p = sub.add_parser("attack", help="run a named attack against a target protocol")
    attack_p.add_argument("--attack", required=True, choices=("lemma4", "theorem3", "theorem5"))
    attack_p.add_argument("--target", required=True, help=f"one of {sorted(ATTACK_TARGETS)}")
    attack_p.add_argument("--horizon", "-t", type=int, required=True)
    attack_p.add_argument("--trials", type=int, default=100)
    attack_p.add_argument("--seed", type=int, default=0)
    attack_p.add_argument("--x1", type=float, default=1.0, help="first-slot send probability (lemma4)")
    attack_p.add_argument("--h-const", type=float, default=16.0, help="straggler-rate constant (lemma4)")
    attack_p.add_argument("--workers", type=int, default=1)
    attack_p.add_argument("--out", default=".")
    attack_p.set_defaults(func=cmd_attack)

    analyze_p = sub.add_parser("analyze", help="summarize a saved trace file")
    analyze_p.add_argument("trace", help="trace JSONL file")
    analyze_p.add_argument("--out", default=None, help="also write a JSON report here")
    analyze_p.add_argument("--max-intervals", type=int, default=20)
    analyze_p.set_defaults(func=cmd_analyze)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, TraceFormatError, TraceCorruption, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
