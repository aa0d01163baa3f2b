"""Event fan-out with sequence numbers and replayable history.

The broker sits between the runtime (single publisher) and any number of
stream consumers.  Every published event gets the next sequence number;
a bounded ring keeps recent history so a reconnecting client can resume
from its last seen id.  When the requested resume point has already been
evicted the subscriber is told so explicitly instead of silently missing
events.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from typing import Iterator


class EventBroker:
    def __init__(self, capacity: int = 4096):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self._buf: deque[tuple[int, dict]] = deque(maxlen=capacity)
        self._next_seq = 1
        self._cond = threading.Condition()
        self._closed = False

    @property
    def latest_seq(self) -> int:
        """Sequence of the most recently published event (0 if none)."""
        with self._cond:
            return self._next_seq - 1

    @property
    def closed(self) -> bool:
        with self._cond:
            return self._closed

    def publish(self, doc: dict) -> int:
        with self._cond:
            if self._closed:
                raise RuntimeError("broker is closed")
            seq = self._next_seq
            self._next_seq += 1
            self._buf.append((seq, doc))
            self._cond.notify_all()
        return seq

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def snapshot_since(self, last_seq: int) -> tuple[list[tuple[int, dict]], bool]:
        """Buffered events after ``last_seq`` and whether any were evicted.

        The second element is True when the resume point predates the
        ring, i.e. events between ``last_seq`` and the oldest buffered
        one are gone and the caller should resynchronize from a snapshot.
        """
        with self._cond:
            events = [(seq, doc) for seq, doc in self._buf if seq > last_seq]
            lost = bool(self._buf) and last_seq + 1 < self._buf[0][0]
            lost = lost or (not self._buf and last_seq < self._next_seq - 1)
            return events, lost

    def wait_for(self, last_seq: int, timeout: float) -> list[tuple[int, dict]]:
        """Block up to ``timeout`` seconds for events after ``last_seq``."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while not self._closed:
                events = [(seq, doc) for seq, doc in self._buf if seq > last_seq]
                if events:
                    return events
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return []
                self._cond.wait(remaining)
            return [(seq, doc) for seq, doc in self._buf if seq > last_seq]


def _frame(event: str | None, seq: int | None, data: dict) -> str:
    lines = []
    if event is not None:
        lines.append(f"event: {event}")
    if seq is not None:
        lines.append(f"id: {seq}")
    lines.append("data: " + json.dumps(data, sort_keys=True))
    return "\n".join(lines) + "\n\n"


def sse_stream(broker: EventBroker, last_seq: int, heartbeat_s: float = 15.0,
               max_events: int | None = None,
               idle_timeout_s: float | None = None) -> Iterator[str]:
    """Yield server-sent event frames for everything after ``last_seq``.

    Heartbeat comments keep intermediaries from closing an idle
    connection.  ``max_events`` and ``idle_timeout_s`` bound the stream
    so scripted consumers (and tests) can read to a clean end; an
    interactive client just leaves both unset.
    """
    backlog, lost = broker.snapshot_since(last_seq)
    if lost:
        oldest = backlog[0][0] if backlog else broker.latest_seq + 1
        yield _frame("resync", None, {"oldest_seq": oldest,
                                      "requested_after": last_seq})
    emitted = 0
    last_activity = time.monotonic()
    pending = backlog
    while True:
        for seq, doc in pending:
            yield _frame(doc.get("kind", "message"), seq, doc)
            last_seq = seq
            emitted += 1
            if max_events is not None and emitted >= max_events:
                return
        if pending:
            last_activity = time.monotonic()
        if broker.closed:
            remainder, _ = broker.snapshot_since(last_seq)
            if not remainder:
                return
            pending = remainder
            continue
        wait = heartbeat_s
        if idle_timeout_s is not None:
            idle_left = idle_timeout_s - (time.monotonic() - last_activity)
            if idle_left <= 0:
                return
            wait = min(wait, idle_left)
        pending = broker.wait_for(last_seq, wait)
        if not pending:
            yield ": keep-alive\n\n"
