"""Configuration schemas for the ctxcat CLI."""

from typing import Optional
from pydantic import BaseModel, Field, field_validator, ConfigDict


class OutputConfig(BaseModel):
    """Output formatting configuration."""

    format: str = Field(
        default="table",
        description="Output format: json, table, or csv",
        pattern="^(json|table|csv)$"
    )
    colors: bool = Field(
        default=True,
        description="Enable colored output"
    )


class LoggingConfig(BaseModel):
    """Command log configuration."""

    enabled: bool = Field(
        default=True,
        description="Enable the JSON-lines command log"
    )
    log_path: str = Field(
        default="~/.ctxcat/cli.log",
        description="Command log file path"
    )
    log_level: str = Field(
        default="info",
        description="Log level: debug, info, warn, error",
        pattern="^(debug|info|warn|error)$"
    )
    max_size_mb: int = Field(
        default=20,
        description="Max log file size before rotation",
        ge=1
    )
    backup_count: int = Field(
        default=5,
        description="Number of backup log files to keep",
        ge=1
    )


class RuntimeConfig(BaseModel):
    """Parallelism and run directory settings."""

    threads: Optional[int] = Field(
        default=None,
        description="Thread cap for torch and generator pools (OAK_THREADS overrides)",
        ge=1
    )
    runs_root: str = Field(
        default="runs",
        description="Root directory for run outputs"
    )


class CtxcatConfig(BaseModel):
    """Root configuration for the ctxcat CLI."""

    model_config = ConfigDict(validate_assignment=True)

    version: str = Field(
        default="0.1",
        description="Configuration format version"
    )
    output: OutputConfig = Field(
        default_factory=OutputConfig,
        description="Output formatting configuration"
    )
    logging: LoggingConfig = Field(
        default_factory=LoggingConfig,
        description="Command log configuration"
    )
    runtime: RuntimeConfig = Field(
        default_factory=RuntimeConfig,
        description="Runtime configuration"
    )

    @field_validator("version")
    @classmethod
    def validate_version(cls, v):
        """Validate configuration version."""
        if v not in ["0.1"]:
            raise ValueError(f"Unsupported config version: {v}")
        return v


__all__ = [
    "OutputConfig",
    "LoggingConfig",
    "RuntimeConfig",
    "CtxcatConfig"
]
