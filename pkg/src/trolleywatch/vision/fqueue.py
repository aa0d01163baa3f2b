"""Bounded frame queue with drop-oldest back-pressure.

Used when the producer (real-time sim clock) and the pipeline run on
different threads.  When the queue is full the oldest frame is dropped
and counted; a monitoring pipeline wants the freshest frame, not a
growing backlog.
"""

from __future__ import annotations

import threading
from collections import deque


class FrameQueue:
    def __init__(self, capacity: int = 8):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.capacity = capacity
        self._items: deque = deque()
        self._cond = threading.Condition()
        self.dropped = 0
        self._closed = False

    def put(self, item) -> None:
        with self._cond:
            if self._closed:
                raise RuntimeError("queue is closed")
            if len(self._items) >= self.capacity:
                self._items.popleft()
                self.dropped += 1
            self._items.append(item)
            self._cond.notify()

    def get(self, timeout: float | None = None):
        """Next frame, oldest first; None when closed and drained or timed out."""
        with self._cond:
            while not self._items and not self._closed:
                if not self._cond.wait(timeout=timeout):
                    return None
            if self._items:
                return self._items.popleft()
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)
