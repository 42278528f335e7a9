"""Command and epoch logging for the ctxcat CLI."""

from ctxcat_cli.logging.audit import RunLogger
from ctxcat_cli.logging.epoch_events import EpochEvent, append_epoch_event, read_epoch_events

__all__ = ["RunLogger", "EpochEvent", "append_epoch_event", "read_epoch_events"]
