"""Tests for the CLI framework: root group, config, output and run manifests."""

import json

import click
import pytest
from click.testing import CliRunner

from ctxcat.exceptions import ConfigError
from ctxcat_cli import __version__
from ctxcat_cli.cli import cli, dispatch
from ctxcat_cli.config.config import ConfigManager
from ctxcat_cli.config.schemas import CtxcatConfig, LoggingConfig
from ctxcat_cli.logging.audit import RunLogger
from ctxcat_cli.logging.epoch_events import EpochEvent, append_epoch_event, read_epoch_events
from ctxcat_cli.output.formatter import OutputFormatter
from ctxcat_cli.runs import (
    RunManifest,
    load_run_manifest,
    parse_seeds,
    recorded_argv,
    run_dir,
    write_run_manifest,
)


@pytest.fixture
def cli_runner():
    """Get Click CLI test runner."""
    return CliRunner()


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CTXCAT_CONFIG", str(tmp_path / "missing.yml"))
    monkeypatch.setenv("CTXCAT_LOG_PATH", str(tmp_path / "cli.log"))
    for name in ("OAK_THREADS", "CTXCAT_RUNS_ROOT", "CTXCAT_FORMAT"):
        monkeypatch.delenv(name, raising=False)


def test_cli_version(cli_runner):
    """Test --version flag."""
    result = cli_runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_cli_help(cli_runner):
    """Test --help flag."""
    result = cli_runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    assert "ctxcat" in result.output
    for command in ("gen", "train", "eval", "name", "saliency", "report", "sweep", "replay", "prompt"):
        assert command in result.output


def test_dispatch_usage_error(capsys):
    assert dispatch(["train", "--no-such-flag"]) == 2


def test_dispatch_version():
    assert dispatch(["--version"]) == 0


class TestConfigManager:
    """Tests for configuration management."""

    def test_config_defaults(self):
        """Test default configuration values."""
        config = CtxcatConfig()

        assert config.output.format == "table"
        assert config.output.colors is True
        assert config.logging.enabled is True
        assert config.runtime.threads is None
        assert config.runtime.runs_root == "runs"

    def test_file_and_env(self, tmp_path, monkeypatch):
        path = tmp_path / "config.yml"
        path.write_text("output:\n  format: csv\nruntime:\n  runs_root: /data/runs\n", encoding="utf-8")
        monkeypatch.setenv("OAK_THREADS", "3")

        config = ConfigManager(str(path)).get_config()

        assert config.output.format == "csv"
        assert config.runtime.runs_root == "/data/runs"
        assert config.runtime.threads == 3

    def test_env_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / "config.yml"
        path.write_text("output:\n  format: csv\n", encoding="utf-8")
        monkeypatch.setenv("CTXCAT_FORMAT", "json")

        assert ConfigManager(str(path)).get_config().output.format == "json"

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "config.yml"
        path.write_text("output:\n  format: xml\n", encoding="utf-8")

        with pytest.raises(ConfigError, match="output.format"):
            ConfigManager(str(path))

    def test_save_round_trip(self, tmp_path):
        manager = ConfigManager(str(tmp_path / "config.yml"))
        config = manager.get_config()
        config.output.colors = False

        manager.save_config(config)

        assert ConfigManager(str(tmp_path / "config.yml")).get_config().output.colors is False

    def test_bad_settings_file_exits(self, cli_runner, tmp_path):
        path = tmp_path / "bad.yml"
        path.write_text("- a list\n", encoding="utf-8")

        result = cli_runner.invoke(cli, ["--settings", str(path), "prompt", "--help"])

        assert result.exit_code == 1
        assert "error[config]" in result.output


class TestOutputFormatter:
    """Tests for output formatting."""

    def test_format_json(self):
        """Test JSON output format."""
        formatter = OutputFormatter(format="json", colors=False)

        data = [{"context": "color", "overall": 0.5}]
        output = formatter.format_output(data)

        assert json.loads(output) == data

    def test_format_csv(self):
        """Test CSV output format."""
        formatter = OutputFormatter(format="csv", colors=False)

        output = formatter.format_output([["color", 0.5]], headers=["context", "overall"])

        assert output.splitlines() == ['"context","overall"', '"color","0.5"']

    def test_format_table(self):
        """Test table output format."""
        formatter = OutputFormatter(format="table", colors=False)

        output = formatter.format_output([["color", "50.0"]], headers=["CONTEXT", "OVERALL"])

        assert "CONTEXT" in output
        assert "50.0" in output


class TestRunLogger:
    def test_command_lines(self, tmp_path):
        log_path = tmp_path / "cli.log"
        logger = RunLogger(LoggingConfig(log_path=str(log_path)))

        logger.log_command(command="eval", args={"seed": 0}, result="ok")
        logger.log_command(command="train", args={}, error="boom", module="training")

        events = [json.loads(line) for line in log_path.read_text(encoding="utf-8").splitlines()]
        assert [e["decision"] for e in events] == ["SUCCESS", "ERROR"]
        assert events[1]["output"]["module"] == "training"
        assert events[0]["input"]["args"] == {"seed": 0}

    def test_disabled(self, tmp_path):
        logger = RunLogger(LoggingConfig(enabled=False, log_path=str(tmp_path / "cli.log")))

        logger.log_command(command="eval")

        assert not (tmp_path / "cli.log").exists()


class TestEpochEvents:
    def test_append_and_read(self, tmp_path):
        path = tmp_path / "epochs.jsonl"
        append_epoch_event(EpochEvent("train.epoch", "ok", {"epoch": 0, "loss": 1.5}), path)
        append_epoch_event(EpochEvent("train.epoch", "ok", {"epoch": 1, "loss": 1.2}), path)

        events = read_epoch_events(path)

        assert [e.details["epoch"] for e in events] == [0, 1]
        assert read_epoch_events(path, limit=1)[0].details["loss"] == 1.2

    def test_partial_last_line(self, tmp_path):
        path = tmp_path / "epochs.jsonl"
        append_epoch_event(EpochEvent("train.epoch", "ok", {"epoch": 0}), path)
        with path.open("a", encoding="utf-8") as f:
            f.write('{"event_type": "train.ep')

        assert len(read_epoch_events(path)) == 1

    def test_lines_are_stable(self):
        event = EpochEvent("train.epoch", "ok", {"b": 1, "a": 2})

        assert event.to_line() == '{"details":{"a":2,"b":1},"event_type":"train.epoch","status":"ok"}'


class TestRuns:
    @pytest.mark.parametrize(
        "text, expected",
        [("0..4", [0, 1, 2, 3, 4]), ("0,2,5", [0, 2, 5]), ("3", [3]), (" 1..2 ", [1, 2])],
    )
    def test_parse_seeds(self, text, expected):
        assert parse_seeds(text) == expected

    @pytest.mark.parametrize("text", ["", "a..b", "1,1", "-1", "4..2"])
    def test_bad_seeds(self, text):
        with pytest.raises(click.BadParameter):
            parse_seeds(text)

    def test_recorded_argv(self):
        argv = recorded_argv(
            "eval",
            {"seed": 0, "dataset": "runs/d0", "context": ["color", "shape"], "config": None, "resume": False},
        )

        assert argv == ["eval", "--context", "color", "--context", "shape", "--dataset", "runs/d0", "--seed", "0"]

    def test_recorded_flag(self):
        assert recorded_argv("train", {"resume": True}) == ["train", "--resume"]

    def test_run_dir(self):
        assert run_dir("runs", "data/d0", "color", "oak", 2).as_posix() == "runs/d0/color/oak/seed2"

    def test_manifest_round_trip(self, tmp_path):
        manifest = RunManifest(command="eval", argv=["eval", "--seed", "1"], seeds=[1], out=str(tmp_path), method="oak")

        write_run_manifest(manifest, tmp_path)

        assert load_run_manifest(tmp_path) == manifest

    def test_manifest_rejects_unknown_fields(self, tmp_path):
        (tmp_path / "run.yaml").write_text("command: eval\nargv: [eval]\nout: x\nextra: 1\n", encoding="utf-8")

        with pytest.raises(ConfigError, match="extra"):
            load_run_manifest(tmp_path)
