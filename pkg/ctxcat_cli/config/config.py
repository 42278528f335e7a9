"""Configuration loading and management."""

import os
from pathlib import Path
from typing import Any, Dict, Optional
import yaml
from dotenv import load_dotenv
from ctxcat.exceptions import ConfigError
from ctxcat.settings import validate_config
from ctxcat_cli.config.schemas import CtxcatConfig

ENV_OVERRIDES = (
    ("CTXCAT_FORMAT", "output", "format"),
    ("CTXCAT_LOG_PATH", "logging", "log_path"),
    ("OAK_THREADS", "runtime", "threads"),
    ("CTXCAT_RUNS_ROOT", "runtime", "runs_root"),
)


def default_config_dir() -> Path:
    return Path.home() / ".ctxcat"


class ConfigManager:
    """Load and manage ctxcat CLI configuration."""

    def __init__(self, config_path: Optional[str] = None):
        """Initialize config manager."""
        configured = config_path or os.getenv("CTXCAT_CONFIG")
        self.config_path = Path(configured).expanduser() if configured else default_config_dir() / "config.yml"
        self.config: Optional[CtxcatConfig] = None
        self._load_config()

    def _load_config(self) -> None:
        """Load configuration from multiple sources."""
        # 1. .env file if present
        load_dotenv()

        # 2. config file if it exists
        file_config: Dict[str, Any] = {}
        if self.config_path.exists():
            try:
                file_config = yaml.safe_load(self.config_path.read_text(encoding="utf-8")) or {}
            except (OSError, yaml.YAMLError) as e:
                raise ConfigError(f"Failed to load config file {self.config_path}: {e}") from e
            if not isinstance(file_config, dict):
                raise ConfigError(f"{self.config_path}: expected a mapping at top level")

        # 3. environment overrides, then validation
        self.config = validate_config(CtxcatConfig, self._merge_with_env(file_config))

    def _merge_with_env(self, file_config: Dict[str, Any]) -> Dict[str, Any]:
        """Merge file config with environment variables."""
        merged = {key: dict(value) if isinstance(value, dict) else value for key, value in file_config.items()}
        for variable, section, key in ENV_OVERRIDES:
            value = os.getenv(variable)
            if value:
                merged.setdefault(section, {})[key] = value
        return merged

    def get_config(self) -> CtxcatConfig:
        """Get loaded configuration."""
        if not self.config:
            raise ConfigError("Configuration not loaded")
        return self.config

    def save_config(self, config: CtxcatConfig, path: Optional[str] = None) -> Path:
        """Save configuration to YAML file."""
        output_path = Path(path or self.config_path)
        output_path.parent.mkdir(parents=True, exist_ok=True)

        with open(output_path, "w", encoding="utf-8") as f:
            yaml.safe_dump(config.model_dump(exclude_none=True), f, default_flow_style=False)
        return output_path


__all__ = ["ConfigManager"]
