"""Structured JSON event lines on the ``ctxcat.*`` loggers."""

from __future__ import annotations

import json
import logging
from typing import Any


def emit_event(logger: logging.Logger, event_type: str, level: int = logging.INFO, **fields: Any) -> None:
    """Emit a single compact JSON object; no handler is installed here."""
    if not logger.isEnabledFor(level):
        return
    payload = {"event_type": event_type, **fields}
    logger.log(level, json.dumps(payload, default=str, separators=(",", ":"), sort_keys=True))


__all__ = ["emit_event"]
