"""One simulation instance: engine, bus, workload and delivery log wired together."""

from __future__ import annotations

from dataclasses import dataclass

from .engine import Engine, rng_stream
from .mac import EthernetBus, EthernetParams
from .trace import DeliveryLog
from .workload import FileTransferWorkload, WorkloadConfig


@dataclass
class RunResult:
    log: DeliveryLog
    counters: dict
    success_time: int
    duration: int
    events: int
    transfers_completed: int
    bytes_requested: int
    bytes_delivered: int
    bytes_dropped: int


class NetworkSimulation:
    """Clients and servers sharing one CSMA/CD bus.

    RNG streams are keyed by ``(seed, station)`` so two instances that share a
    seed but differ in MAC parameters draw identical workload randomness.
    """

    def __init__(self, params: EthernetParams, workload: WorkloadConfig, seed, log_events: bool = False):
        self.engine = Engine(log_events=log_events)
        n = workload.n_clients + workload.n_servers
        rngs = [rng_stream(seed, f"mac{i}") for i in range(n)]
        self.log = DeliveryLog()
        self.bus = EthernetBus(self.engine, params, rngs, self._delivered, self._dropped)
        self.workload = FileTransferWorkload(self.engine, self.bus, workload, seed)

    def _delivered(self, frame, t):
        self.log.record_delivery(t, frame.payload_bytes)
        self.workload.on_delivery(frame, t)

    def _dropped(self, frame, cause, t):
        self.workload.on_drop(frame, cause, t)

    def run(self, duration: int) -> RunResult:
        self.workload.start()
        summary = self.engine.run_until(duration)
        self.bus.check_conservation()
        wl = self.workload
        return RunResult(
            log=self.log,
            counters=self.bus.totals(),
            success_time=self.bus.success_time,
            duration=duration,
            events=summary.events_fired,
            transfers_completed=wl.n_completed,
            bytes_requested=wl.bytes_requested,
            bytes_delivered=wl.bytes_delivered,
            bytes_dropped=wl.bytes_dropped,
        )
