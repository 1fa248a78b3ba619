"""CLI subcommands: determinism, validation, recomputable aggregates."""

import csv
import json
import math

import numpy as np
import pytest

from contend.cli import AGGREGATE_COLUMNS, TRIAL_COLUMNS, main, parse_config
from contend.engine import ConfigError


def write_config(tmp_path, **overrides):
    config = {
        "protocol": {"name": "three_phase"},
        "adversary": {"name": "none", "script": {"kind": "batch", "n": 1, "slot": 1}},
        "horizons": [16],
        "trials": 1,
        "seed": 7,
    }
    config.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParseConfig:
    def test_minimal_valid(self):
        cfg = parse_config({"horizons": [8], "trials": 2})
        assert cfg.protocol["name"] == "three_phase" and cfg.trials == 2

    @pytest.mark.parametrize(
        "bad",
        [
            {"horizons": [], "trials": 1},
            {"horizons": [8], "trials": 0},
            {"horizons": [0], "trials": 1},
            {"horizons": [8], "trials": 1, "protocol": {"name": "csma"}},
            {"horizons": [8], "trials": 1, "adversary": {"name": "nemesis"}},
            {"horizons": [8], "trials": 1, "seed": -3},
            {"horizons": [8], "trials": 1, "params": {"a": -1}},
            [],
        ],
    )
    def test_rejected(self, bad):
        with pytest.raises(ConfigError):
            parse_config(bad)


class TestRun:
    def test_lone_node_row(self, tmp_path):
        config = write_config(tmp_path, horizons=[1])
        out = tmp_path / "out"
        assert main(["run", "--config", config, "--out", str(out)]) == 0
        rows = read_rows(out / "trials.csv")
        assert len(rows) == 1
        row = rows[0]
        assert row["successes"] == "1" and row["active"] == "1"
        assert row["n_t"] == "1" and row["d_t"] == "0"
        assert row["satisfied"] == "1" and row["intervals"] == "1"
        assert list(rows[0].keys()) == TRIAL_COLUMNS

    def test_rerun_byte_identical(self, tmp_path):
        config = write_config(
            tmp_path,
            protocol={"name": "three_phase"},
            adversary={"name": "random_jam", "rate": 0.2, "script": {"kind": "uniform", "n": 8}},
            horizons=[128],
            trials=4,
        )
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", config, "--out", str(out1)]) == 0
        assert main(["run", "--config", config, "--out", str(out2)]) == 0
        assert (out1 / "trials.csv").read_bytes() == (out2 / "trials.csv").read_bytes()

    def test_workers_match_serial(self, tmp_path):
        config = write_config(tmp_path, horizons=[64], trials=4)
        serial, parallel = tmp_path / "s", tmp_path / "p"
        assert main(["run", "--config", config, "--out", str(serial)]) == 0
        assert main(["run", "--config", config, "--out", str(parallel), "--workers", "2"]) == 0
        assert (serial / "trials.csv").read_bytes() == (parallel / "trials.csv").read_bytes()

    def test_seed_override_changes_rows(self, tmp_path):
        config = write_config(
            tmp_path,
            adversary={"name": "random_jam", "rate": 0.5, "script": {"kind": "uniform", "n": 4}},
            horizons=[64],
        )
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", "--config", config, "--out", str(a)]) == 0
        assert main(["run", "--config", config, "--out", str(b), "--seed", "99"]) == 0
        assert (a / "trials.csv").read_bytes() != (b / "trials.csv").read_bytes()

    def test_invalid_config_nonzero_exit(self, tmp_path):
        config = write_config(tmp_path, trials=0)
        assert main(["run", "--config", config, "--out", str(tmp_path / "x")]) == 2
        assert not (tmp_path / "x" / "trials.csv").exists()

    def test_missing_config_nonzero_exit(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2

    def test_emit_traces(self, tmp_path):
        config = write_config(tmp_path, horizons=[8])
        out = tmp_path / "out"
        assert main(["run", "--config", config, "--out", str(out), "--emit-traces"]) == 0
        assert (out / "traces" / "trace_h8_t0.jsonl").exists()


class TestSweep:
    def test_aggregates_recomputable(self, tmp_path):
        config = write_config(
            tmp_path,
            protocol={"name": "bexp"},
            adversary={"name": "random_jam", "rate": 0.1, "script": {"kind": "uniform", "n": 6}},
            horizons=[32, 64, 128],
            trials=5,
        )
        out = tmp_path / "out"
        assert main(["sweep", "--config", config, "--out", str(out)]) == 0
        agg = read_rows(out / "sweep.csv")
        assert len(agg) == 3
        assert list(agg[0].keys()) == AGGREGATE_COLUMNS
        for row in agg:
            horizon = int(row["horizon"])
            trials = read_rows(out / f"trials_h{horizon}.csv")
            successes = np.array([float(r["successes"]) for r in trials])
            violated = np.array([1 - int(r["satisfied"]) for r in trials])
            assert float(row["mean_successes"]) == pytest.approx(successes.mean())
            assert float(row["median_successes"]) == pytest.approx(float(np.quantile(successes, 0.5)))
            assert float(row["violation_freq"]) == pytest.approx(violated.mean())
            norm = horizon / math.log2(horizon)
            assert float(row["norm_successes"]) == pytest.approx(successes.mean() / norm)
            assert float(row["jam_rate"]) == pytest.approx(0.1)

    def test_empty_horizons_rejected(self, tmp_path):
        config = write_config(tmp_path, horizons=[])
        assert main(["sweep", "--config", config, "--out", str(tmp_path / "x")]) == 2


class TestAttack:
    def test_reproducible_report(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["attack", "--attack", "theorem3", "--target", "bexp", "-t", "64", "--trials", "5", "--seed", "3"]
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        assert (a / "attack_trials.csv").read_bytes() == (b / "attack_trials.csv").read_bytes()
        assert (a / "attack_summary.json").read_bytes() == (b / "attack_summary.json").read_bytes()
        summary = json.loads((a / "attack_summary.json").read_text())
        assert 0.0 <= summary["zero_success_freq"] <= 1.0

    def test_unknown_target_rejected(self, tmp_path):
        assert (
            main(["attack", "--attack", "theorem3", "--target", "tdma", "-t", "64", "--out", str(tmp_path)]) == 2
        )

    def test_lemma4_flags(self, tmp_path):
        out = tmp_path / "out"
        args = [
            "attack", "--attack", "lemma4", "--target", "bexp",
            "-t", "256", "--trials", "3", "--x1", "1.0", "--h-const", "16", "--out", str(out),
        ]
        assert main(args) == 0
        rows = read_rows(out / "attack_trials.csv")
        assert all(r["n_t"] == "392" for r in rows)  # 16*24 batch + 8 stragglers


class TestAnalyze:
    def test_lone_node_trace(self, tmp_path, capsys):
        config = write_config(tmp_path, horizons=[1])
        out = tmp_path / "out"
        assert main(["run", "--config", config, "--out", str(out), "--emit-traces"]) == 0
        trace_path = out / "traces" / "trace_h1_t0.jsonl"
        report_path = tmp_path / "report.json"
        assert main(["analyze", str(trace_path), "--out", str(report_path)]) == 0
        text = capsys.readouterr().out
        assert "complete intervals: 1" in text
        report = json.loads(report_path.read_text())
        assert report["intervals"][0]["start"] == 1 and report["intervals"][0]["end"] == 1
        assert report["satisfied"] is True

    def test_jam_everything_trace(self, tmp_path, capsys):
        config = write_config(
            tmp_path,
            protocol={"name": "bexp"},
            adversary={"name": "random_jam", "rate": 1.0, "script": {"kind": "batch", "n": 3, "slot": 1}},
            horizons=[50],
        )
        out = tmp_path / "out"
        assert main(["run", "--config", config, "--out", str(out), "--emit-traces"]) == 0
        assert main(["analyze", str(out / "traces" / "trace_h50_t0.jsonl")]) == 0
        text = capsys.readouterr().out
        assert "0 transition" in text

    def test_truncated_trace_rejected(self, tmp_path, capsys):
        config = write_config(tmp_path, horizons=[8])
        out = tmp_path / "out"
        main(["run", "--config", config, "--out", str(out), "--emit-traces"])
        path = out / "traces" / "trace_h8_t0.jsonl"
        lines = path.read_text().splitlines()
        (tmp_path / "clipped.jsonl").write_text("\n".join(lines[:4]))
        assert main(["analyze", str(tmp_path / "clipped.jsonl")]) == 2
        assert "error:" in capsys.readouterr().err
