"""Output formatting for ctxcat commands."""

import json
from typing import Any, List, Optional
from io import StringIO
import click
from tabulate import tabulate
from ctxcat.exceptions import CtxcatError
from ctxcat_cli.output.colors import ColorScheme


class OutputFormatter:
    """Format command output in multiple formats."""

    def __init__(self, format: str = "table", colors: bool = True):
        """Initialize formatter.

        Args:
            format: Output format (json, table, csv)
            colors: Enable colored output
        """
        self.format = format
        self.colors = colors

    def format_output(self, data: Any, headers: Optional[List[str]] = None) -> str:
        """Format data according to selected format.

        Args:
            data: Data to format (list of dicts or list of lists)
            headers: Column headers for table format

        Returns:
            Formatted output string
        """
        if self.format == "json":
            return self._format_json(data, headers)
        elif self.format == "csv":
            return self._format_csv(data, headers)
        else:
            return self._format_table(data, headers)

    def _format_json(self, data: Any, headers: Optional[List[str]] = None) -> str:
        """Format as JSON; list rows are keyed by headers."""
        if headers and isinstance(data, list) and data and isinstance(data[0], (list, tuple)):
            data = [dict(zip(headers, row)) for row in data]
        return json.dumps(data, indent=2, default=str)

    def _format_csv(self, data: Any, headers: Optional[List[str]] = None) -> str:
        """Format as CSV."""
        if not data:
            return ""

        if isinstance(data, list) and isinstance(data[0], dict):
            headers = headers or list(data[0].keys())
            data = [[row.get(h, "") for h in headers] for row in data]

        if isinstance(data, list) and isinstance(data[0], (list, tuple)):
            output = StringIO()
            if headers:
                output.write(",".join(f'"{h}"' for h in headers) + "\n")
            for row in data:
                output.write(",".join(f'"{v}"' for v in row) + "\n")
            return output.getvalue()

        return self._format_json(data)

    def _format_table(self, data: Any, headers: Optional[List[str]] = None) -> str:
        """Format as human-readable table."""
        if not data:
            return "(no results)"

        if isinstance(data, list) and isinstance(data[0], dict):
            headers = headers or list(data[0].keys())
            data = [[item.get(h, "") for h in headers] for item in data]

        if isinstance(data, list) and isinstance(data[0], (list, tuple)):
            table = tabulate(data, headers=headers or (), tablefmt="simple", disable_numparse=True)

            if self.colors and headers:
                lines = table.split("\n")
                if len(lines) >= 2:
                    lines[0] = ColorScheme.format(lines[0], ColorScheme.HEADER)
                    lines[1] = ColorScheme.muted(lines[1])
                    table = "\n".join(lines)
            return table

        return str(data)

    def print_success(self, message: str) -> None:
        """Print success message."""
        click.echo(ColorScheme.success(message) if self.colors else f"✓ {message}")

    def print_error(self, message: str) -> None:
        """Print error message to stderr."""
        click.echo(ColorScheme.error(message) if self.colors else message, err=True)

    def print_failure(self, exc: CtxcatError) -> None:
        """Print the categorized one-line error for a library failure."""
        self.print_error(f"error[{exc.module}]: {exc}")

    def print_warning(self, message: str) -> None:
        """Print warning message."""
        click.echo(ColorScheme.warning(message) if self.colors else f"⚠ {message}", err=True)

    def print_info(self, message: str) -> None:
        """Print info message."""
        click.echo(ColorScheme.info(message) if self.colors else f"ℹ {message}")

    def print_header(self, text: str) -> None:
        """Print section header."""
        click.echo(ColorScheme.header(text) if self.colors else text)


__all__ = ["OutputFormatter"]
