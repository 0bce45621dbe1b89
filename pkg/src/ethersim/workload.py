"""Closed-loop client/server file transfers.

Each client thinks, sends a small request frame to a uniformly chosen server,
and waits until every segment of the reply has been delivered or dropped
before thinking again. Servers answer with the file cut into 1 KiB frames.
Lost segments are not resent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import NS_PER_S, Engine, rng_stream
from .mac import EthernetBus, Frame

SEGMENT_BYTES = 1024
REQUEST_BYTES = 64


class WorkloadError(RuntimeError):
    pass


@dataclass(frozen=True)
class Distribution:
    """A positive-valued distribution given as ``kind:param[:param]``.

    Supported kinds: ``constant:v``, ``exponential:mean``,
    ``uniform:low:high`` and ``pareto:shape:mean`` (shape > 1).
    """

    kind: str
    params: tuple[float, ...]

    @classmethod
    def parse(cls, text: str) -> "Distribution":
        kind, *rest = [p.strip() for p in text.strip().split(":")]
        try:
            params = tuple(float(p) for p in rest)
        except ValueError:
            raise ValueError(f"bad distribution parameters in {text!r}") from None
        arity = {"constant": 1, "exponential": 1, "uniform": 2, "pareto": 2}
        if kind not in arity:
            raise ValueError(f"unknown distribution kind {kind!r}")
        if len(params) != arity[kind]:
            raise ValueError(f"{kind} takes {arity[kind]} parameter(s), got {len(params)}")
        dist = cls(kind, params)
        dist._validate()
        return dist

    def _validate(self):
        p = self.params
        if self.kind == "constant" and p[0] < 0:
            raise ValueError("constant must be >= 0")
        if self.kind == "exponential" and p[0] <= 0:
            raise ValueError("exponential mean must be > 0")
        if self.kind == "uniform" and not 0 <= p[0] <= p[1]:
            raise ValueError("uniform needs 0 <= low <= high")
        if self.kind == "pareto" and (p[0] <= 1 or p[1] <= 0):
            raise ValueError("pareto needs shape > 1 and mean > 0")

    @property
    def mean(self) -> float:
        p = self.params
        if self.kind == "uniform":
            return (p[0] + p[1]) / 2
        return p[-1] if self.kind == "pareto" else p[0]

    def sample(self, rng) -> float:
        p = self.params
        if self.kind == "constant":
            return p[0]
        if self.kind == "exponential":
            return rng.expovariate(1.0 / p[0])
        if self.kind == "uniform":
            return rng.uniform(p[0], p[1])
        shape, mean = p
        return mean * (shape - 1) / shape * rng.paretovariate(shape)

    def __str__(self):
        return ":".join([self.kind, *(f"{v:g}" for v in self.params)])


@dataclass(frozen=True)
class WorkloadConfig:
    n_clients: int = 32
    n_servers: int = 2
    file_size_dist: Distribution = Distribution("exponential", (65536.0,))
    # None means: calibrate the mean think time to ``target_load``
    think_time_dist: Distribution | None = None
    target_load: float = 0.4
    # Optional load modulation: mean sojourn (s) of congested and
    # uncongested phases. The think-time mean switches between the
    # calibrations for ``congested_load`` and ``uncongested_load``.
    congestion_periods_s: tuple[float, float] | None = None
    congested_load: float = 1.0
    uncongested_load: float = 0.2

    def __post_init__(self):
        if self.n_clients < 1 or self.n_servers < 1:
            raise ValueError("need at least one client and one server")
        for name in ("target_load", "congested_load", "uncongested_load"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must be in (0, 1]")
        if self.congestion_periods_s is not None:
            if len(self.congestion_periods_s) != 2 or min(self.congestion_periods_s) <= 0:
                raise ValueError("congestion_periods_s needs two positive mean durations")

    def think_dist(self, params, load: float | None = None) -> Distribution:
        if self.think_time_dist is not None:
            return self.think_time_dist
        return Distribution("exponential", (calibrated_think_mean(self, params, load),))


def calibrated_think_mean(config: WorkloadConfig, params, load: float | None = None) -> float:
    """Mean think time (s) giving an offered load of ``load`` (default ``target_load``).

    Each client cycles through think, request and reply; the offered load is
    ``n_clients * mean_file_bits / (cycle * bandwidth)``.
    """
    if load is None:
        load = config.target_load
    file_mean = config.file_size_dist.mean
    cycle = config.n_clients * file_mean * 8 / (load * params.bandwidth_bps)
    segments = file_mean / SEGMENT_BYTES + 0.5
    per_segment = params.frame_duration(SEGMENT_BYTES) + params.ifg
    service = (segments * per_segment + params.frame_duration(REQUEST_BYTES) + params.ifg) / NS_PER_S
    return max(cycle - service, 0.0)


@dataclass(frozen=True)
class StationId:
    index: int
    role: str


@dataclass
class TransferSpec:
    client: StationId
    server: StationId
    file_bytes: int
    request_time: int


@dataclass(eq=False)
class Transfer:
    spec: TransferSpec
    n_segments: int = 0
    resolved: int = 0
    delivered_bytes: int = 0
    dropped_bytes: int = 0
    request_dropped: bool = False
    completed_at: int | None = None


def segment_file(file_bytes: int, segment_bytes: int = SEGMENT_BYTES) -> list[int]:
    """Payload sizes for a file: full segments then any remainder."""
    if file_bytes < 1:
        raise ValueError("file_bytes must be >= 1")
    full, rest = divmod(file_bytes, segment_bytes)
    return [segment_bytes] * full + ([rest] if rest else [])


@dataclass
class _Client:
    sid: StationId
    rng: object
    in_flight: Transfer | None = None
    transfers: int = 0


class FileTransferWorkload:
    """Drives a set of clients and servers attached to an :class:`EthernetBus`.

    Stations ``0 .. n_clients-1`` are clients, the next ``n_servers`` are
    servers. Call :meth:`on_delivery` / :meth:`on_drop` from the bus hooks.
    """

    def __init__(self, engine: Engine, bus: EthernetBus, config: WorkloadConfig, seed):
        self.engine = engine
        self.bus = bus
        self.config = config
        self.servers = [StationId(config.n_clients + j, "server") for j in range(config.n_servers)]
        self.clients = [
            _Client(StationId(i, "client"), rng_stream(seed, f"client{i}")) for i in range(config.n_clients)
        ]
        self.think = config.think_dist(bus.params)
        self.congested = False
        self._phase_rng = rng_stream(seed, "load-phase")
        self.completed: list[Transfer] = []
        self.keep_transfers = False
        self.n_completed = 0
        self.bytes_requested = 0
        self.bytes_delivered = 0
        self.bytes_dropped = 0

    @property
    def n_stations(self) -> int:
        return self.config.n_clients + self.config.n_servers

    def start(self) -> None:
        if self.config.congestion_periods_s is not None:
            self._switch_phase()
        for client in self.clients:
            self._schedule_think(client)

    def _switch_phase(self) -> None:
        cfg = self.config
        self.congested = not self.congested
        load = cfg.congested_load if self.congested else cfg.uncongested_load
        self.think = cfg.think_dist(self.bus.params, load)
        mean = cfg.congestion_periods_s[0 if self.congested else 1]
        stay = int(round(self._phase_rng.expovariate(1.0 / mean) * NS_PER_S))
        self.engine.schedule(self.engine._now + stay, self._switch_phase)

    def next_request(self, client: _Client) -> TransferSpec:
        rng = client.rng
        server = self.servers[rng.randrange(len(self.servers))]
        size = max(1, math.ceil(self.config.file_size_dist.sample(rng)))
        return TransferSpec(client.sid, server, size, self.engine._now)

    def _schedule_think(self, client: _Client) -> None:
        delay = int(round(self.think.sample(client.rng) * NS_PER_S))
        self.engine.schedule(self.engine._now + delay, self._request, client)

    def _request(self, client: _Client) -> None:
        if client.in_flight is not None:
            raise WorkloadError(f"client {client.sid.index} already has a transfer in flight")
        spec = self.next_request(client)
        transfer = Transfer(spec)
        client.in_flight = transfer
        client.transfers += 1
        self.bytes_requested += spec.file_bytes
        self.bus.enqueue_frame(spec.client.index, Frame(spec.client.index, spec.server.index, REQUEST_BYTES, tag=transfer))

    def on_delivery(self, frame: Frame, t: int) -> None:
        transfer = frame.tag
        if transfer is None:
            return
        spec = transfer.spec
        if frame.src == spec.client.index:
            self._serve(transfer)
        else:
            transfer.delivered_bytes += frame.payload_bytes
            self._progress(transfer)

    def on_drop(self, frame: Frame, cause: str, t: int) -> None:
        transfer = frame.tag
        if transfer is None:
            return
        if frame.src == transfer.spec.client.index:
            # lost request: the whole file counts as dropped
            transfer.request_dropped = True
            transfer.dropped_bytes = transfer.spec.file_bytes
            self._complete(transfer)
        else:
            transfer.dropped_bytes += frame.payload_bytes
            self._progress(transfer)

    def _serve(self, transfer: Transfer) -> None:
        spec = transfer.spec
        sizes = segment_file(spec.file_bytes)
        transfer.n_segments = len(sizes)
        src, dst = spec.server.index, spec.client.index
        enqueue = self.bus.enqueue_frame
        for size in sizes:
            enqueue(src, Frame(src, dst, size, tag=transfer))

    def _progress(self, transfer: Transfer) -> None:
        transfer.resolved += 1
        if transfer.resolved == transfer.n_segments:
            self._complete(transfer)

    def _complete(self, transfer: Transfer) -> None:
        spec = transfer.spec
        if transfer.delivered_bytes + transfer.dropped_bytes != spec.file_bytes:
            raise WorkloadError("transfer byte accounting does not balance")
        transfer.completed_at = self.engine._now
        self.n_completed += 1
        self.bytes_delivered += transfer.delivered_bytes
        self.bytes_dropped += transfer.dropped_bytes
        if self.keep_transfers:
            self.completed.append(transfer)
        client = self.clients[spec.client.index]
        client.in_flight = None
        self._schedule_think(client)
