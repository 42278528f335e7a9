"""Output formatting for ctxcat commands."""

from ctxcat_cli.output.formatter import OutputFormatter
from ctxcat_cli.output.colors import ColorScheme

__all__ = ["OutputFormatter", "ColorScheme"]
