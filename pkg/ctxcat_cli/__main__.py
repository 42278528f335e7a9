"""
CLI entry point: python -m ctxcat_cli
"""

import sys
from ctxcat_cli.cli import dispatch

if __name__ == "__main__":
    sys.exit(dispatch())
