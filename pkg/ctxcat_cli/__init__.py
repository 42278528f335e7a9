"""
ctxcat operator CLI

Generate synthetic datasets, train context tokens, evaluate, name clusters,
draw relevance maps and aggregate multi-seed reports.
"""

__version__ = "0.1.0"
__author__ = "ctxcat contributors"
__license__ = "MIT"

from ctxcat_cli.cli import cli, dispatch

__all__ = ["cli", "dispatch"]
