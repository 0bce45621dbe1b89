"""Delivery logs and their fixed-width byte-count traces."""

from __future__ import annotations

import csv
from array import array
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine import NS_PER_S, to_ticks


class DeliveryLog:
    """Time-ordered ``(completion_time_ns, bytes)`` records."""

    def __init__(self):
        self.times = array("q")
        self.sizes = array("q")

    def record_delivery(self, t: int, nbytes: int) -> None:
        if self.times and t < self.times[-1]:
            raise ValueError(f"delivery at {t} precedes last record {self.times[-1]}")
        if nbytes <= 0:
            raise ValueError("delivered bytes must be positive")
        self.times.append(t)
        self.sizes.append(nbytes)

    def __len__(self):
        return len(self.times)

    @property
    def records(self) -> list[tuple[int, int]]:
        return list(zip(self.times, self.sizes))

    @property
    def total_bytes(self) -> int:
        return int(sum(self.sizes))


@dataclass(frozen=True)
class TrafficTrace:
    bin_width: int
    start: int
    bins: np.ndarray

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")

    def __len__(self):
        return len(self.bins)

    @property
    def bin_starts(self) -> np.ndarray:
        return self.start + self.bin_width * np.arange(len(self.bins), dtype=np.int64)

    def to_csv(self, path) -> None:
        write_trace_csv(self, path)


def aggregate(log: DeliveryLog, bin_width: int, start: int, end: int) -> TrafficTrace:
    """Sum bytes into half-open bins ``[start + j*w, start + (j+1)*w)``.

    Only whole bins inside ``[start, end)`` are kept.
    """
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    nbins = max(0, (end - start) // bin_width)
    times = np.frombuffer(log.times, dtype=np.int64) if len(log) else np.zeros(0, np.int64)
    sizes = np.frombuffer(log.sizes, dtype=np.int64) if len(log) else np.zeros(0, np.int64)
    lo, hi = np.searchsorted(times, [start, start + nbins * bin_width], side="left")
    idx = (times[lo:hi] - start) // bin_width
    bins = np.bincount(idx, weights=sizes[lo:hi], minlength=nbins).astype(np.int64)
    return TrafficTrace(bin_width, start, bins[:nbins])


def rescale(trace: TrafficTrace, factor: int) -> TrafficTrace:
    """Merge every ``factor`` consecutive bins; a trailing remainder is dropped."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    n = len(trace.bins) // factor
    bins = np.asarray(trace.bins[: n * factor]).reshape(n, factor).sum(axis=1)
    return TrafficTrace(trace.bin_width * factor, trace.start, bins.astype(np.int64))


def write_trace_csv(trace: TrafficTrace, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_start_s", "bytes"])
        for t, b in zip(trace.bin_starts.tolist(), trace.bins.tolist()):
            w.writerow([format_seconds(t), b])


def read_trace_csv(path) -> TrafficTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["bin_start_s", "bytes"]:
            raise ValueError(f"{path}: expected header 'bin_start_s,bytes'")
        rows = [(r[0].strip(), r[1].strip()) for r in reader if r]
    starts = [to_ticks(r[0]) for r in rows]
    bins = np.array([float(r[1]) for r in rows])
    if len(starts) >= 2:
        width = starts[1] - starts[0]
    else:
        width = NS_PER_S
    if width <= 0:
        raise ValueError(f"{path}: bin starts must increase")
    if np.all(bins == np.round(bins)):
        bins = bins.astype(np.int64)
    return TrafficTrace(width, starts[0] if starts else 0, bins)


def format_seconds(ticks: int) -> str:
    """Exact decimal rendering of a nanosecond count in seconds."""
    whole, frac = divmod(ticks, NS_PER_S)
    if not frac:
        return str(whole)
    return f"{whole}.{frac:09d}".rstrip("0")
