"""CSMA/CD on a single shared-bus collision domain.

Every station pair is ``prop_delay`` apart. A station senses the bus at time
``t`` as it was at ``t - prop_delay``. Transmissions whose on-air intervals
overlap collide; each participant notices when the other's signal reaches it,
jams for ``jam_time`` and then backs off a uniform number of slots drawn from
``[0, 2**min(i, cap) - 1]`` where ``i`` counts consecutive collisions of the
head-of-line frame. After ``max_retx`` retransmissions the frame is dropped.

Inter-frame gap handling follows the two-part deference rule of 802.3: carrier
that appears only in the last third of the gap does not stop the pending
transmission.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .engine import Engine, to_ticks

IDLE = "Idle"
DEFERRING = "Deferring"
WAITING_IFG = "WaitingIFG"
TRANSMITTING = "Transmitting"
JAMMING = "Jamming"
BACKOFF = "Backoff"

DROP_COLLISION = "collision"
DROP_OVERFLOW = "overflow"


class ContractViolation(AssertionError):
    """A MAC invariant or operation precondition does not hold."""


@dataclass(frozen=True)
class EthernetParams:
    """10 Mbps Ethernet timing, all durations in nanoseconds."""

    bandwidth_bps: int = 10_000_000
    prop_delay: int = 950
    slot_time: int = 51_200
    jam_time: int = 3_200
    ifg: int = 9_600
    max_retx: int = 15
    backoff_exponent_cap: int = 10
    queue_depth: int = 100

    def __post_init__(self):
        for name in ("bandwidth_bps", "prop_delay", "slot_time", "jam_time", "ifg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.slot_time < 2 * self.prop_delay:
            raise ValueError("slot_time must be at least twice prop_delay")
        if self.max_retx < 1:
            raise ValueError("max_retx must be >= 1")
        if self.backoff_exponent_cap < 1:
            raise ValueError("backoff_exponent_cap must be >= 1")
        if self.queue_depth < 1:
            raise ValueError("queue_depth must be >= 1")

    @classmethod
    def from_seconds(cls, **kw) -> "EthernetParams":
        for name in ("prop_delay", "slot_time", "jam_time", "ifg"):
            if name in kw:
                kw[name] = to_ticks(kw[name])
        return cls(**kw)

    def frame_duration(self, payload_bytes: int) -> int:
        return -(-payload_bytes * 8 * 1_000_000_000 // self.bandwidth_bps)


@dataclass(slots=True)
class Frame:
    src: int
    dst: int
    payload_bytes: int
    seq: int = 0
    enqueue_time: int = 0
    tag: object = None

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("frame source and destination must differ")
        if self.payload_bytes <= 0:
            raise ValueError("payload_bytes must be positive")


def backoff_slots(attempt_i: int, rng, max_retx: int, cap: int = 10) -> int:
    """Uniform slot count in ``[0, 2**min(attempt_i, cap) - 1]``."""
    if not 1 <= attempt_i <= max_retx:
        raise ContractViolation(f"attempt_i={attempt_i} outside [1, {max_retx}]")
    return rng.getrandbits(min(attempt_i, cap))


@dataclass(eq=False)
class Station:
    sid: int
    rng: object
    queue: deque = field(default_factory=deque)
    phase: str = IDLE
    attempt_i: int = 0
    head_attempts: int = 0
    ifg_start: int = 0
    next_seq: int = 0
    # current or most recent emission on the bus
    em_start: int = 0
    em_end: int = 0
    on_air: bool = False
    collided: bool = False
    tx_handle: list | None = None
    detect_handle: list | None = None
    detect_at: int = 0
    # counters
    enqueued: int = 0
    delivered: int = 0
    delivered_bytes: int = 0
    collisions: int = 0
    collision_drops: int = 0
    overflow_drops: int = 0
    max_attempts_seen: int = 0

    @property
    def counters(self) -> dict:
        return {
            "enqueued": self.enqueued,
            "delivered": self.delivered,
            "delivered_bytes": self.delivered_bytes,
            "collisions": self.collisions,
            "collision_drops": self.collision_drops,
            "overflow_drops": self.overflow_drops,
            "queued": len(self.queue),
        }


class EthernetBus:
    """The collision domain plus one MAC state machine per attached station.

    ``on_delivery(frame, t)`` is called at transmission completion and
    ``on_drop(frame, cause, t)`` whenever a frame is discarded.
    """

    def __init__(self, engine: Engine, params: EthernetParams, rngs, on_delivery=None, on_drop=None):
        self.engine = engine
        self.params = params
        self.stations = [Station(i, rng) for i, rng in enumerate(rngs)]
        self.on_delivery = on_delivery
        self.on_drop = on_drop
        self._air: list[Station] = []
        self._deferring: list[Station] = []
        self._checks: set[int] = set()
        self._durations: dict[int, int] = {}
        self._ifg_part1 = (2 * params.ifg) // 3
        self.success_time = 0

    # -- public operations -------------------------------------------------

    def enqueue_frame(self, sid: int, frame: Frame) -> bool:
        """Queue a frame at a station; returns False on overflow drop."""
        st = self.stations[sid]
        st.enqueued += 1
        frame.enqueue_time = self.engine._now
        frame.seq = st.next_seq
        st.next_seq += 1
        if len(st.queue) >= self.params.queue_depth:
            st.overflow_drops += 1
            if self.on_drop is not None:
                self.on_drop(frame, DROP_OVERFLOW, self.engine._now)
            return False
        st.queue.append(frame)
        if st.phase == IDLE:
            self._access(st)
        return True

    def sense_channel(self, sid: int, t: int | None = None) -> bool:
        """True when station ``sid`` hears carrier at ``t`` (default now)."""
        if t is None:
            t = self.engine._now
        return self._carrier(self.stations[sid], t) is not None

    def backoff_slots(self, st: Station) -> int:
        p = self.params
        return backoff_slots(st.attempt_i, st.rng, p.max_retx, p.backoff_exponent_cap)

    def totals(self) -> dict:
        out: dict[str, int] = {}
        for st in self.stations:
            for k, v in st.counters.items():
                out[k] = out.get(k, 0) + v
        return out

    def check_conservation(self) -> None:
        for st in self.stations:
            rhs = st.delivered + st.collision_drops + st.overflow_drops + len(st.queue)
            if st.enqueued != rhs:
                raise ContractViolation(f"station {st.sid}: enqueued {st.enqueued} != {rhs}")
            if st.max_attempts_seen > self.params.max_retx + 1:
                raise ContractViolation(f"station {st.sid}: {st.max_attempts_seen} attempts on one frame")

    # -- carrier sense -----------------------------------------------------

    def _carrier(self, st: Station, t: int):
        """Time the current carrier became audible to ``st``, or None if idle."""
        delay = self.params.prop_delay
        seen = t - delay
        since = None
        stale = False
        for other in self._air:
            if other.em_end <= seen:
                stale = True
                continue
            if other is st or other.em_start > seen:
                continue
            heard = other.em_start + delay
            if since is None or heard < since:
                since = heard
        if stale and t == self.engine._now:
            keep = []
            for o in self._air:
                if o.em_end > seen:
                    keep.append(o)
                else:
                    o.on_air = False
            self._air = keep
        return since

    def _idle_eta(self, st: Station) -> int:
        delay = self.params.prop_delay
        return max(o.em_end for o in self._air if o is not st) + delay

    # -- state machine -----------------------------------------------------

    def _access(self, st: Station) -> None:
        """Head frame ready: start the inter-frame gap or defer to carrier."""
        now = self.engine._now
        if self._carrier(st, now) is None:
            st.phase = WAITING_IFG
            st.ifg_start = now
            self.engine.schedule(now + self.params.ifg, self._attempt, st)
        else:
            self._defer(st, now)

    def _defer(self, st: Station, now: int) -> None:
        st.phase = DEFERRING
        self._deferring.append(st)
        self._schedule_check(self._idle_eta(st))

    def _schedule_check(self, t: int) -> None:
        if t not in self._checks:
            self._checks.add(t)
            self.engine.schedule(t, self._carrier_check, t)

    def _carrier_check(self, t: int) -> None:
        self._checks.discard(t)
        waiting = []
        for st in self._deferring:
            if self._carrier(st, t) is None:
                st.phase = WAITING_IFG
                st.ifg_start = t
                self.engine.schedule(t + self.params.ifg, self._attempt, st)
            else:
                waiting.append(st)
        self._deferring = waiting

    def _attempt(self, st: Station) -> None:
        now = self.engine._now
        since = self._carrier(st, now)
        if since is not None and since < st.ifg_start + self._ifg_part1:
            self._defer(st, now)
            return
        self._transmit(st, now)

    def _transmit(self, st: Station, now: int) -> None:
        frame = st.queue[0]
        st.head_attempts += 1
        if st.head_attempts > st.max_attempts_seen:
            st.max_attempts_seen = st.head_attempts
            if st.head_attempts > self.params.max_retx + 1:
                raise ContractViolation(f"station {st.sid} exceeded the attempt limit")
        n = frame.payload_bytes
        dur = self._durations.get(n)
        if dur is None:
            dur = self._durations[n] = self.params.frame_duration(n)
        st.phase = TRANSMITTING
        st.em_start = now
        st.em_end = now + dur
        st.collided = False
        st.detect_handle = None
        delay = self.params.prop_delay
        schedule = self.engine.schedule
        detect = None
        for other in self._air:
            if other is st or other.em_end <= now:
                continue
            # overlapping emissions: both frames are lost
            hear = other.em_start + delay
            if hear < now:
                hear = now
            if detect is None or hear < detect:
                detect = hear
            if other.phase == TRANSMITTING and not other.collided:
                other.collided = True
                other.detect_at = now + delay
                other.detect_handle = schedule(now + delay, self._detect, other)
        if detect is not None:
            st.collided = True
            st.detect_at = detect
            st.detect_handle = schedule(detect, self._detect, st)
        if not st.on_air:
            st.on_air = True
            self._air.append(st)
        st.tx_handle = schedule(st.em_end, self._tx_end, st)

    def _detect(self, st: Station) -> None:
        st.detect_handle = None
        if st.phase != TRANSMITTING:
            return
        self.engine.cancel(st.tx_handle)
        st.tx_handle = None
        self._collide(st, self.engine._now)

    def _collide(self, st: Station, now: int) -> None:
        st.phase = JAMMING
        st.collisions += 1
        st.em_end = now + self.params.jam_time
        st.attempt_i += 1
        if st.attempt_i > self.params.max_retx:
            frame = st.queue.popleft()
            st.collision_drops += 1
            st.attempt_i = 0
            st.head_attempts = 0
            if self.on_drop is not None:
                self.on_drop(frame, DROP_COLLISION, now)
            self.engine.schedule(st.em_end, self._jam_end, st, False)
        else:
            self.engine.schedule(st.em_end, self._jam_end, st, True)

    def _tx_end(self, st: Station) -> None:
        now = self.engine._now
        st.tx_handle = None
        if st.collided:
            # frame ended before the collision signal reached us
            if st.detect_handle is not None:
                self.engine.cancel(st.detect_handle)
                st.detect_handle = None
            self._collide(st, now)
            return
        frame = st.queue.popleft()
        st.delivered += 1
        st.delivered_bytes += frame.payload_bytes
        st.attempt_i = 0
        st.head_attempts = 0
        self.success_time += now - st.em_start
        if self.on_delivery is not None:
            self.on_delivery(frame, now)
        self._released(now)
        if st.queue:
            self._access(st)
        else:
            st.phase = IDLE

    def _jam_end(self, st: Station, backoff: bool) -> None:
        now = self.engine._now
        self._released(now)
        if backoff:
            st.phase = BACKOFF
            k = self.backoff_slots(st)
            self.engine.schedule(now + k * self.params.slot_time, self._backoff_end, st)
        elif st.queue:
            self._access(st)
        else:
            st.phase = IDLE

    def _backoff_end(self, st: Station) -> None:
        self._access(st)

    def _released(self, now: int) -> None:
        if self._deferring:
            self._schedule_check(now + self.params.prop_delay)
