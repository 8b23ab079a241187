"""Deterministic discrete-event engine.

Time is integer nanoseconds. Events with equal timestamps are dispatched in
the order they were scheduled, so a run is a pure function of its inputs.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Any, Callable

NS_PER_SEC = 1_000_000_000
NS_PER_MS = 1_000_000
NS_PER_US = 1_000


def seconds(s: float) -> int:
    return round(s * NS_PER_SEC)


def millis(ms: float) -> int:
    return round(ms * NS_PER_MS)


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current time."""


@dataclass
class SimSummary:
    now: int = 0
    dispatched: int = 0
    pending: int = 0
    counters: dict[str, int] = field(default_factory=dict)


class EventHandle:
    """Returned by :meth:`EventLoop.schedule`; call :meth:`cancel` to drop the event."""

    __slots__ = ("_entry",)

    def __init__(self, entry: list) -> None:
        self._entry = entry

    @property
    def time(self) -> int:
        return self._entry[0]

    @property
    def cancelled(self) -> bool:
        return self._entry[2] is None

    def cancel(self) -> None:
        self._entry[2] = None
        self._entry[3] = ()


class EventLoop:
    def __init__(self) -> None:
        self.now = 0
        self._heap: list[list] = []
        self._seq = 0
        self.dispatched = 0
        self.counters: dict[str, int] = {}
        self.trace: list[tuple[int, int, str]] | None = None
        # set by a handler to end run_until after the current event
        self.halted = False

    def schedule(self, at: int, fn: Callable[..., Any], *args: Any) -> EventHandle:
        if at < self.now:
            raise SchedulingError(f"event at {at} ns scheduled in the past (now={self.now})")
        entry = [at, self._seq, fn, args]
        self._seq += 1
        heapq.heappush(self._heap, entry)
        return EventHandle(entry)

    def call_at(self, at: int, fn: Callable[..., Any], *args: Any) -> None:
        """Like :meth:`schedule` without building a handle (hot path)."""
        if at < self.now:
            raise SchedulingError(f"event at {at} ns scheduled in the past (now={self.now})")
        heapq.heappush(self._heap, [at, self._seq, fn, args])
        self._seq += 1

    def pending(self) -> int:
        return sum(1 for e in self._heap if e[2] is not None)

    def run_until(self, t_end: int, stop: Callable[[], bool] | None = None) -> SimSummary:
        """Dispatch every event with time <= t_end.

        ``stop`` is polled after each event; returning True ends the run early.
        """
        heap = self._heap
        pop = heapq.heappop
        trace = self.trace
        n = 0
        while heap and heap[0][0] <= t_end and not self.halted:
            at, seq, fn, args = pop(heap)
            if fn is None:
                continue
            self.now = at
            if trace is not None:
                trace.append((at, seq, getattr(fn, "__qualname__", repr(fn))))
            fn(*args)
            n += 1
            if stop is not None and stop():
                break
        self.dispatched += n
        return SimSummary(self.now, self.dispatched, self.pending(), dict(self.counters))
