"""Append-only JSON Lines event log.

One record per line, keys sorted, no whitespace: identical runs produce
byte-identical files, which the replay tests diff directly.  Records
never mutate; corrections append new records.  Per-station timestamps
must be non-decreasing (several records may legitimately share one
timestamp, e.g. the observation that raised an alert).

Record schema (documented for consumers in docs/event_log.md):
    t        float   simulation time, seconds
    kind     str     observation | status_change | alert_raised |
                     alert_resolved | dispatch | ack | rejection
    station  str|null
    ...      kind-specific fields flattened into the same object
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from ..errors import EventLogOrderError

KINDS = frozenset({
    "observation", "status_change", "alert_raised", "alert_resolved",
    "dispatch", "ack", "rejection",
})

_RESERVED = ("t", "kind", "station")


@dataclass(frozen=True)
class EventLogRecord:
    t: float
    kind: str
    station: str | None
    data: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        doc = {"t": self.t, "kind": self.kind, "station": self.station}
        doc.update(self.data)
        return doc

    def to_line(self) -> str:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_doc(cls, doc: dict) -> "EventLogRecord":
        data = {k: v for k, v in doc.items() if k not in _RESERVED}
        return cls(t=float(doc["t"]), kind=str(doc["kind"]),
                   station=doc.get("station"), data=data)


class EventLog:
    """Durable, ordered append sink; optionally backed by a file."""

    def __init__(self, path: str | os.PathLike | None = None, fsync: bool = False):
        self.path = str(path) if path is not None else None
        self.fsync = fsync
        self.records: list[EventLogRecord] = []
        self._last_t: dict[str | None, float] = {}
        self._fh = open(self.path, "w", encoding="utf-8") if self.path else None

    def append(self, record: EventLogRecord) -> None:
        if record.kind not in KINDS:
            raise ValueError(f"unknown record kind {record.kind!r}")
        last = self._last_t.get(record.station)
        if last is not None and record.t < last:
            raise EventLogOrderError(
                f"station {record.station!r}: record at {record.t} after {last}")
        self._last_t[record.station] = record.t
        self.records.append(record)
        if self._fh is not None:
            self._fh.write(record.to_line() + "\n")
            self._fh.flush()
            if self.fsync:
                os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_event_log(path: str | os.PathLike) -> list[EventLogRecord]:
    """Parse a log file back into records, preserving order."""
    records: list[EventLogRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_no}: bad JSON ({exc})")
            records.append(EventLogRecord.from_doc(doc))
    return records
