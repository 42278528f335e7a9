"""CLI context object for ctxcat."""

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ctxcat.settings import RuntimeSettings
    from ctxcat_cli.config.config import ConfigManager
    from ctxcat_cli.logging.audit import RunLogger
    from ctxcat_cli.output.formatter import OutputFormatter


class CtxcatContext:
    """Context passed to all CLI commands."""

    def __init__(
        self,
        config_manager: "ConfigManager",
        formatter: "OutputFormatter",
        run_logger: "RunLogger",
        runtime: "RuntimeSettings",
    ):
        self.config_manager = config_manager
        self.formatter = formatter
        self.run_logger = run_logger
        self.runtime = runtime


__all__ = ["CtxcatContext"]
