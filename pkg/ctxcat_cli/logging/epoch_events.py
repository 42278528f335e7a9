"""Per-run epoch event log; no timestamps, so replays write identical bytes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

EPOCH_LOG_FILENAME = "epochs.jsonl"


@dataclass(frozen=True)
class EpochEvent:
    event_type: str
    status: str
    details: dict[str, Any] = field(default_factory=dict)

    def to_line(self) -> str:
        return json.dumps(
            {"event_type": self.event_type, "status": self.status, "details": self.details},
            default=str,
            separators=(",", ":"),
            sort_keys=True,
        )


def append_epoch_event(event: EpochEvent, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as f:
        f.write(event.to_line() + "\n")


def read_epoch_events(path: Path, *, limit: Optional[int] = None) -> list[EpochEvent]:
    if not path.exists():
        return []

    lines = path.read_text(encoding="utf-8").splitlines()
    events: list[EpochEvent] = []
    for line in lines[-limit:] if limit else lines:
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError:
            # a killed run can leave a partial last line
            continue
        events.append(
            EpochEvent(
                event_type=str(obj.get("event_type")),
                status=str(obj.get("status")),
                details=dict(obj.get("details") or {}),
            )
        )
    return events


__all__ = ["EPOCH_LOG_FILENAME", "EpochEvent", "append_epoch_event", "read_epoch_events"]
