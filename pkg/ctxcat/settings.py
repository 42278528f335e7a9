"""Shared runtime settings resolution for the library, the CLI and tests."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Type, TypeVar, Union
import os

import yaml
from pydantic import BaseModel, ValidationError

from .exceptions import ConfigError

ModelT = TypeVar("ModelT", bound=BaseModel)


DEFAULT_THREADS = 1


@dataclass(frozen=True)
class RuntimeSettings:
    """Resolved runtime settings."""

    threads: int = DEFAULT_THREADS
    runs_root: str = "runs"


def _config_file_path() -> Path:
    configured = os.getenv("CTXCAT_CONFIG")
    if configured:
        return Path(configured).expanduser()
    return Path.home() / ".ctxcat" / "config.yml"


def _load_cli_config() -> Dict[str, Any]:
    config_path = _config_file_path()
    if not config_path.exists():
        return {}

    try:
        return yaml.safe_load(config_path.read_text(encoding="utf-8")) or {}
    except Exception:
        return {}


def _parse_threads(value: Any) -> Optional[int]:
    if value is None or value == "":
        return None
    try:
        threads = int(value)
    except (TypeError, ValueError):
        return None
    return threads if threads >= 1 else None


def resolve_runtime_settings(
    *,
    threads: Optional[int] = None,
    runs_root: Optional[str] = None,
) -> RuntimeSettings:
    """Resolve runtime settings from explicit args, env vars, CLI config, and defaults."""
    config = _load_cli_config()
    runtime = config.get("runtime") or {}

    resolved_threads = (
        _parse_threads(threads)
        or _parse_threads(os.getenv("OAK_THREADS"))
        or _parse_threads(runtime.get("threads"))
        or DEFAULT_THREADS
    )
    resolved_runs_root = (
        runs_root
        or os.getenv("CTXCAT_RUNS_ROOT")
        or runtime.get("runs_root")
        or "runs"
    )

    return RuntimeSettings(threads=resolved_threads, runs_root=str(resolved_runs_root))


def apply_thread_cap(settings: Optional[RuntimeSettings] = None) -> int:
    """Cap torch intra-op parallelism; returns the cap in effect."""
    import torch

    resolved = settings or resolve_runtime_settings()
    torch.set_num_threads(resolved.threads)
    return resolved.threads


def _parse_flat(text: str, source: str) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {number}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in values:
            raise ConfigError(f"{source}: line {number}: duplicate key '{key}'")
        try:
            values[key] = yaml.safe_load(value.strip()) if value.strip() else None
        except yaml.YAMLError as exc:
            raise ConfigError(f"{source}: line {number}: {exc}") from exc
    return values


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a YAML mapping or a flat key=value run config.

    Raises:
        ConfigError: Unreadable file or not a mapping
    """
    source = Path(path)
    try:
        text = source.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {source}: {exc}") from exc

    flat = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    if flat and all("=" in line and ":" not in line.split("=", 1)[0] for line in flat):
        return _parse_flat(text, str(source))

    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {source}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: expected a mapping at top level")
    return data


def validate_config(model: Type[ModelT], data: Optional[Mapping[str, Any]] = None) -> ModelT:
    """Build a pydantic config, reporting validation failures as ConfigError."""
    try:
        return model.model_validate(dict(data or {}))
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(part) for part in err['loc']) or model.__name__}: {err['msg']}"
            for err in exc.errors()
        )
        raise ConfigError(f"invalid {model.__name__}: {problems}") from exc


__all__ = [
    "RuntimeSettings",
    "resolve_runtime_settings",
    "apply_thread_cap",
    "read_config_file",
    "validate_config",
]
