"""Tests for the bprelab command line."""

from __future__ import annotations

import json

import pytest

from bprelab.__main__ import build_parser, run
from bprelab.errors import ExitCode


@pytest.fixture
def validate_config(write_config, lattice_file):
    return write_config(
        kind="validate", ensemble=str(lattice_file), sigma_horizon=16, N_sigma=256, seed=3
    )


class TestParser:
    def test_defaults_are_none(self):
        args = build_parser().parse_args(["lyapunov"])
        assert args.kind == "lyapunov"
        assert args.seed is None
        assert args.force is None

    def test_unknown_kind(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["nonsense"])


class TestRun:
    def test_validate_writes_outputs(self, validate_config, tmp_path):
        out = tmp_path / "out"
        code = run(["validate", "--config", str(validate_config), "--out", str(out), "--log-level", "warning"])
        # the canonical lattice fails the entry-ratio condition at delta = 1/2
        assert code == ExitCode.VERDICT_FAILURE
        report = json.loads((out / "report.json").read_text())
        assert report["kind"] == "validate"
        assert report["seed"] == 3
        assert report["seed_source"] == "config"
        runs = [json.loads(line) for line in (out / "provenance.jsonl").read_text().splitlines()]
        assert runs[-1]["event"] == "run"
        assert runs[-1]["passed"] is False
        assert "wall_clock_seconds" in runs[-1]

    def test_cli_seed_wins(self, validate_config, tmp_path):
        out = tmp_path / "out"
        run(["validate", "--config", str(validate_config), "--out", str(out), "--seed", "11"])
        report = json.loads((out / "report.json").read_text())
        assert report["seed"] == 11
        assert report["seed_source"] == "cli"

    def test_missing_config(self, tmp_path, capsys):
        code = run(["validate", "--config", str(tmp_path / "missing.json")])
        assert code == ExitCode.ERROR
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["code"] == "CONFIG_ERROR"
        assert error["category"] == "configuration"

    def test_lab_error_is_reported(self, write_config, lattice_file, tmp_path, capsys):
        path = write_config(kind="survival", ensemble=str(lattice_file), z=[1, 0, 0], horizons=[1], N_env=10)
        code = run(["survival", "--config", str(path), "--out", str(tmp_path / "out")])
        assert code == ExitCode.ERROR
        assert '"CONFIG_ERROR"' in capsys.readouterr().err

    def test_unexpected_error(self, validate_config, tmp_path, capsys, mocker):
        mocker.patch("bprelab.harness.runner.run_experiment", side_effect=RuntimeError("boom"))
        code = run(["validate", "--config", str(validate_config), "--out", str(tmp_path / "out")])
        assert code == ExitCode.ERROR
        err = capsys.readouterr().err
        assert '"UNKNOWN_ERROR"' in err
        assert "Fatal: boom" in err

    def test_passing_run_exits_zero(self, write_config, lattice_file, tmp_path, mocker):
        from bprelab.harness.report import ExperimentReport

        report = ExperimentReport(kind="lyapunov", version="0", seed=0, seed_source="default", config={})
        mocker.patch("bprelab.harness.runner.run_experiment", return_value=report)
        path = write_config(kind="lyapunov", ensemble=str(lattice_file))
        assert run(["lyapunov", "--config", str(path), "--out", str(tmp_path / "out")]) == ExitCode.OK
