"""Configuration management for the ctxcat CLI."""

from ctxcat_cli.config.config import ConfigManager
from ctxcat_cli.config.schemas import CtxcatConfig, OutputConfig, LoggingConfig, RuntimeConfig

__all__ = ["ConfigManager", "CtxcatConfig", "OutputConfig", "LoggingConfig", "RuntimeConfig"]
