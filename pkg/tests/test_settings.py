"""Tests for shared runtime settings resolution and config files."""

import pytest
import torch
from pydantic import BaseModel, Field

from ctxcat import settings as runtime_settings
from ctxcat.exceptions import ConfigError
from ctxcat.settings import (
    apply_thread_cap,
    read_config_file,
    resolve_runtime_settings,
    validate_config,
)


@pytest.fixture(autouse=True)
def no_cli_config(monkeypatch, tmp_path):
    monkeypatch.setenv("CTXCAT_CONFIG", str(tmp_path / "missing.yml"))
    monkeypatch.delenv("OAK_THREADS", raising=False)
    monkeypatch.delenv("CTXCAT_RUNS_ROOT", raising=False)


def test_defaults():
    settings = resolve_runtime_settings()

    assert settings.threads == 1
    assert settings.runs_root == "runs"


def test_resolve_runtime_settings_prefers_env(monkeypatch):
    monkeypatch.setenv("OAK_THREADS", "3")
    monkeypatch.setenv("CTXCAT_RUNS_ROOT", "/tmp/elsewhere")

    settings = resolve_runtime_settings()

    assert settings.threads == 3
    assert settings.runs_root == "/tmp/elsewhere"


def test_resolve_runtime_settings_reads_cli_config(monkeypatch, tmp_path):
    config = tmp_path / "config.yml"
    config.write_text("runtime:\n  threads: 2\n  runs_root: ./from-config\n", encoding="utf-8")
    monkeypatch.setenv("CTXCAT_CONFIG", str(config))

    settings = resolve_runtime_settings()

    assert settings.threads == 2
    assert settings.runs_root == "./from-config"


def test_explicit_runtime_settings_override_env_and_config(monkeypatch):
    monkeypatch.setattr(
        runtime_settings,
        "_load_cli_config",
        lambda: {"runtime": {"threads": 2, "runs_root": "./from-config"}},
    )
    monkeypatch.setenv("OAK_THREADS", "4")

    settings = resolve_runtime_settings(threads=6, runs_root="./explicit")

    assert settings.threads == 6
    assert settings.runs_root == "./explicit"


def test_invalid_thread_env_falls_through(monkeypatch):
    monkeypatch.setenv("OAK_THREADS", "zero")
    assert resolve_runtime_settings().threads == 1

    monkeypatch.setenv("OAK_THREADS", "0")
    assert resolve_runtime_settings().threads == 1


def test_apply_thread_cap_sets_torch_threads():
    before = torch.get_num_threads()
    try:
        assert apply_thread_cap(resolve_runtime_settings(threads=1)) == 1
        assert torch.get_num_threads() == 1
    finally:
        torch.set_num_threads(before)


class TestConfigFiles:
    def test_flat_key_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# run\nepochs = 3\nlr=0.05\nuse_text_guidance = false\n", encoding="utf-8")

        assert read_config_file(path) == {"epochs": 3, "lr": 0.05, "use_text_guidance": False}

    def test_yaml_mapping(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("epochs: 3\ncontexts:\n  color: [red, blue]\n", encoding="utf-8")

        assert read_config_file(path) == {"epochs": 3, "contexts": {"color": ["red", "blue"]}}

    def test_duplicate_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs=3\nepochs=4\n", encoding="utf-8")

        with pytest.raises(ConfigError, match="duplicate key"):
            read_config_file(path)

    def test_non_mapping_rejected(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("- 1\n- 2\n", encoding="utf-8")

        with pytest.raises(ConfigError, match="mapping"):
            read_config_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config_file(tmp_path / "absent.cfg")

    def test_validate_config_wraps_pydantic_errors(self):
        class Example(BaseModel):
            epochs: int = Field(default=1, ge=1)

        assert validate_config(Example, {"epochs": 2}).epochs == 2
        with pytest.raises(ConfigError, match="epochs"):
            validate_config(Example, {"epochs": 0})
