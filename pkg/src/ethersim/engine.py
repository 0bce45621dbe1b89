"""Discrete-event core: integer-nanosecond clock, priority queue, seeded streams.

Events are ordered by ``(fire_at, seq)`` where ``seq`` is a per-engine
insertion counter, so simultaneous events fire in the order they were
scheduled.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from fractions import Fraction

NS_PER_S = 1_000_000_000

# Queue entries are lists so that cancellation can clear the callback slot
# in place; heapq only ever compares the first two (unique) fields.
_AT, _SEQ, _CALLBACK, _ARGS = range(4)


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled before the current clock."""


def to_ticks(seconds) -> int:
    """Convert seconds (int, float, str or Fraction) to integer nanoseconds.

    Decimal strings and floats are converted through their shortest decimal
    representation, so ``to_ticks(51.2e-6) == 51_200`` exactly.
    """
    if isinstance(seconds, float):
        seconds = repr(seconds)
    ticks = Fraction(seconds) * NS_PER_S
    if ticks.denominator != 1:
        raise ValueError(f"{seconds!r} s is not a whole number of nanoseconds")
    if ticks < 0:
        raise ValueError("negative duration")
    return int(ticks)


def to_seconds(ticks: int) -> float:
    return ticks / NS_PER_S


@dataclass(frozen=True)
class RunSummary:
    events_fired: int
    final_time: int


class Event:
    """Handle for a scheduled callback.

    ``kind`` is the callback's name and serves as the tag in event logs.
    """

    __slots__ = ("_entry",)

    def __init__(self, entry):
        self._entry = entry

    @property
    def fire_at(self) -> int:
        return self._entry[_AT]

    @property
    def seq(self) -> int:
        return self._entry[_SEQ]

    @property
    def kind(self) -> str:
        cb = self._entry[_CALLBACK]
        return "cancelled" if cb is None else getattr(cb, "__name__", repr(cb))

    @property
    def pending(self) -> bool:
        return self._entry[_CALLBACK] is not None


class Engine:
    """Single-threaded event scheduler with a monotone integer clock."""

    def __init__(self, log_events: bool = False):
        self._queue: list[list] = []
        self._seq = 0
        self._now = 0
        self.events_fired = 0
        self.log: list[tuple[int, int, str]] | None = [] if log_events else None

    def now(self) -> int:
        return self._now

    def schedule(self, fire_at: int, callback, *args) -> list:
        """Schedule ``callback(*args)`` at ``fire_at``; returns a cancellable handle.

        The handle is the raw queue entry; wrap it in :class:`Event` for
        read access.
        """
        if fire_at < self._now:
            raise SchedulingError(f"event at {fire_at} scheduled in the past (now={self._now})")
        entry = [fire_at, self._seq, callback, args]
        self._seq += 1
        heapq.heappush(self._queue, entry)
        return entry

    def cancel(self, handle) -> None:
        entry = handle._entry if isinstance(handle, Event) else handle
        entry[_CALLBACK] = None
        entry[_ARGS] = ()

    def run_until(self, t_end: int) -> RunSummary:
        """Fire every event with ``fire_at <= t_end`` in order.

        The clock ends at ``t_end`` even when the queue drains early.
        """
        queue = self._queue
        pop = heapq.heappop
        log = self.log
        fired = 0
        while queue and queue[0][_AT] <= t_end:
            entry = pop(queue)
            callback = entry[_CALLBACK]
            if callback is None:
                continue
            self._now = entry[_AT]
            entry[_CALLBACK] = None
            if log is not None:
                log.append((entry[_AT], entry[_SEQ], callback.__name__))
            callback(*entry[_ARGS])
            fired += 1
        if t_end > self._now:
            self._now = t_end
        self.events_fired += fired
        return RunSummary(fired, self._now)

    def pending(self) -> int:
        return sum(1 for e in self._queue if e[_CALLBACK] is not None)


def rng_stream(master_seed, stream_id) -> random.Random:
    """Independent generator keyed by ``(master_seed, stream_id)``.

    String seeding goes through SHA-512 inside :mod:`random`, so the draw
    sequence is platform independent and unaffected by other streams.
    """
    return random.Random(f"{master_seed}/{stream_id}")
