"""Sweeps over the retransmission limit, analysis pipeline and report files."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .engine import to_ticks
from .mac import EthernetParams
from .selfsim import HurstEstimate, hurst_estimate, write_pox_csv
from .simulation import NetworkSimulation
from .trace import aggregate, format_seconds, write_trace_csv
from .workload import Distribution, WorkloadConfig

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 1
    duration_s: str = "4000"
    warmup_s: str = "100"
    ethernet: EthernetParams = EthernetParams()
    workload: WorkloadConfig = WorkloadConfig()
    max_retx_sweep: tuple[int, ...] = (3, 6, 9)
    bin_widths_s: tuple[str, ...] = ("5", "10", "20")
    seeds_per_point: int = 5
    output_dir: str = "results"

    def __post_init__(self):
        problems = []
        if to_ticks(self.duration_s) <= to_ticks(self.warmup_s):
            problems.append("duration_s must exceed warmup_s")
        if not self.max_retx_sweep:
            problems.append("max_retx_sweep must not be empty")
        if any(r < 1 for r in self.max_retx_sweep):
            problems.append("max_retx_sweep values must be >= 1")
        widths = [to_ticks(w) for w in self.bin_widths_s]
        if not widths:
            problems.append("bin_widths_s must not be empty")
        if any(w <= 0 for w in widths):
            problems.append("bin_widths_s must be positive")
        if any(b <= a for a, b in zip(widths, widths[1:])):
            problems.append("bin_widths_s must be ascending")
        if self.seeds_per_point < 1:
            problems.append("seeds_per_point must be >= 1")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def duration(self) -> int:
        return to_ticks(self.duration_s)

    @property
    def warmup(self) -> int:
        return to_ticks(self.warmup_s)

    @property
    def bin_widths(self) -> list[int]:
        return [to_ticks(w) for w in self.bin_widths_s]


# config key -> (section, field, parser)
def _int(v):
    return int(v)


def _seconds(v):
    to_ticks(v)
    return v


def _ints(v):
    return tuple(int(p) for p in v.replace(",", " ").split())


def _widths(v):
    out = tuple(p for p in v.replace(",", " ").split())
    for p in out:
        to_ticks(p)
    return out


def _think(v):
    return None if v.strip() == "auto" else Distribution.parse(v)


def _periods(v):
    if v.strip() == "none":
        return None
    parts = tuple(float(p) for p in v.replace(",", " ").split())
    if len(parts) != 2:
        raise ValueError("expected two durations")
    return parts


KEYS = {
    "master_seed": (None, "master_seed", _int),
    "duration_s": (None, "duration_s", _seconds),
    "warmup_s": (None, "warmup_s", _seconds),
    "max_retx_sweep": (None, "max_retx_sweep", _ints),
    "bin_widths_s": (None, "bin_widths_s", _widths),
    "seeds_per_point": (None, "seeds_per_point", _int),
    "output_dir": (None, "output_dir", str),
    "n_clients": ("workload", "n_clients", _int),
    "n_servers": ("workload", "n_servers", _int),
    "file_size_dist": ("workload", "file_size_dist", Distribution.parse),
    "think_time_dist": ("workload", "think_time_dist", _think),
    "target_load": ("workload", "target_load", float),
    "congestion_periods_s": ("workload", "congestion_periods_s", _periods),
    "congested_load": ("workload", "congested_load", float),
    "uncongested_load": ("workload", "uncongested_load", float),
    "bandwidth_bps": ("ethernet", "bandwidth_bps", _int),
    "prop_delay_s": ("ethernet", "prop_delay", to_ticks),
    "slot_time_s": ("ethernet", "slot_time", to_ticks),
    "jam_time_s": ("ethernet", "jam_time", to_ticks),
    "ifg_s": ("ethernet", "ifg", to_ticks),
    "backoff_exponent_cap": ("ethernet", "backoff_exponent_cap", _int),
    "queue_depth": ("ethernet", "queue_depth", _int),
}


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse flat ``key = value`` text; ``#`` starts a comment."""
    sections: dict = {None: {}, "workload": {}, "ethernet": {}}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        section, name, parse = KEYS[key]
        try:
            sections[section][name] = parse(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    try:
        ethernet = EthernetParams(**sections["ethernet"])
        workload = WorkloadConfig(**sections["workload"])
        return ExperimentConfig(ethernet=ethernet, workload=workload, **sections[None])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, str(path))


def dump_config(config: ExperimentConfig, include_output_dir: bool = True) -> str:
    """Render a config back to ``key = value`` text (round-trips through parse_config)."""
    eth, wl = config.ethernet, config.workload
    lines = [
        f"master_seed = {config.master_seed}",
        f"duration_s = {config.duration_s}",
        f"warmup_s = {config.warmup_s}",
        f"max_retx_sweep = {', '.join(map(str, config.max_retx_sweep))}",
        f"bin_widths_s = {', '.join(config.bin_widths_s)}",
        f"seeds_per_point = {config.seeds_per_point}",
        *([f"output_dir = {config.output_dir}"] if include_output_dir else []),
        f"n_clients = {wl.n_clients}",
        f"n_servers = {wl.n_servers}",
        f"file_size_dist = {wl.file_size_dist}",
        f"think_time_dist = {wl.think_time_dist or 'auto'}",
        f"target_load = {wl.target_load!r}",
        "congestion_periods_s = "
        + ("none" if wl.congestion_periods_s is None else ", ".join(map(repr, wl.congestion_periods_s))),
        f"congested_load = {wl.congested_load!r}",
        f"uncongested_load = {wl.uncongested_load!r}",
        f"bandwidth_bps = {eth.bandwidth_bps}",
        f"prop_delay_s = {format_seconds(eth.prop_delay)}",
        f"slot_time_s = {format_seconds(eth.slot_time)}",
        f"jam_time_s = {format_seconds(eth.jam_time)}",
        f"ifg_s = {format_seconds(eth.ifg)}",
        f"backoff_exponent_cap = {eth.backoff_exponent_cap}",
        f"queue_depth = {eth.queue_depth}",
    ]
    return "\n".join(lines) + "\n"


@dataclass
class RunRecord:
    max_retx: int
    seed_index: int
    estimates: dict[int, HurstEstimate | None] = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    utilization: float = math.nan
    error: str | None = None
    traces: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    runs: list[RunRecord]

    @property
    def failures(self) -> list[RunRecord]:
        return [r for r in self.runs if not r.ok]

    def h_values(self, max_retx: int, width: int) -> list[float]:
        out = []
        for r in self.runs:
            if r.max_retx == max_retx and r.ok:
                est = r.estimates.get(width)
                if est is not None:
                    out.append(est.H)
        return out

    def mean_h(self, max_retx: int, width: int) -> float:
        hs = self.h_values(max_retx, width)
        return float(np.mean(hs)) if hs else math.nan

    def sd_h(self, max_retx: int, width: int) -> float:
        hs = self.h_values(max_retx, width)
        return float(np.std(hs, ddof=1)) if len(hs) > 1 else 0.0

    def table_rows(self) -> list[dict]:
        rows = []
        for retx in self.config.max_retx_sweep:
            for w in self.config.bin_widths:
                rows.append(
                    {
                        "max_retx": retx,
                        "bin_width_s": format_seconds(w),
                        "mean_H": self.mean_h(retx, w),
                        "sd_H": self.sd_h(retx, w),
                        "n_seeds": len(self.h_values(retx, w)),
                    }
                )
        return rows


def run_seed(config: ExperimentConfig, seed_index: int):
    """Seed label for one sweep point.

    It depends on the master seed and seed index only, so every max_retx
    value sees the same workload randomness (common random numbers) and
    sweep order cannot matter.
    """
    return f"{config.master_seed}/{seed_index}"


def run_one(config: ExperimentConfig, max_retx: int, seed_index: int) -> RunRecord:
    record = RunRecord(max_retx, seed_index)
    try:
        params = replace(config.ethernet, max_retx=max_retx)
        sim = NetworkSimulation(params, config.workload, run_seed(config, seed_index))
        result = sim.run(config.duration)
        record.counters = dict(result.counters, events=result.events, transfers=result.transfers_completed)
        span = config.duration - config.warmup
        window = aggregate(result.log, span, config.warmup, config.duration)
        record.utilization = float(window.bins.sum()) * 8 / params.bandwidth_bps / (span / 1e9)
        for w in config.bin_widths:
            trace = aggregate(result.log, w, config.warmup, config.duration)
            record.traces[w] = trace
            try:
                record.estimates[w] = hurst_estimate(trace.bins)
            except ValueError as exc:
                log.warning("retx=%d seed=%d width=%s: %s", max_retx, seed_index, format_seconds(w), exc)
                record.estimates[w] = None
    except Exception as exc:  # noqa: BLE001 - recorded in the report
        log.exception("run retx=%d seed=%d failed", max_retx, seed_index)
        record.error = f"{type(exc).__name__}: {exc}"
    return record


def _run_star(args):
    return run_one(*args)


def run_sweep(config: ExperimentConfig, jobs: int = 1, order=None, write: bool = True) -> ExperimentReport:
    """Run every (max_retx, seed) point and assemble the report.

    ``order`` optionally permutes execution; the report is always sorted by
    (position in sweep, seed index).
    """
    points = [(retx, s) for retx in config.max_retx_sweep for s in range(config.seeds_per_point)]
    todo = list(order) if order is not None else points
    if sorted(todo) != sorted(points):
        raise ValueError("order must be a permutation of the sweep points")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_star, [(config, r, s) for r, s in todo]))
    else:
        records = []
        for retx, s in todo:
            log.info("running max_retx=%d seed=%d", retx, s)
            records.append(run_one(config, retx, s))
    rank = {p: i for i, p in enumerate(points)}
    records.sort(key=lambda r: rank[(r.max_retx, r.seed_index)])
    report = ExperimentReport(config, records)
    if write:
        write_report(report, config.output_dir)
    return report


def _fmt(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def emit_table(report: ExperimentReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["max_retx", "bin_width_s", "mean_H", "sd_H", "n_seeds"])
        for row in report.table_rows():
            w.writerow([row["max_retx"], row["bin_width_s"], _fmt(row["mean_H"]), _fmt(row["sd_H"]), row["n_seeds"]])
    return path


def emit_figure_data(report: ExperimentReport, out_dir) -> list[Path]:
    """One trace per (max_retx, bin width) panel, from the first successful seed."""
    out_dir = Path(out_dir)
    written = []
    for retx in report.config.max_retx_sweep:
        run = next((r for r in report.runs if r.max_retx == retx and r.ok), None)
        if run is None:
            continue
        for w in report.config.bin_widths:
            path = out_dir / "panels" / f"{retx}_{format_seconds(w)}.csv"
            write_trace_csv(run.traces[w], path)
            written.append(path)
    return written


def _write_kv(path: Path, items) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(f"{k}={v}\n" for k, v in items))


def write_report(report: ExperimentReport, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = report.config
    (out / "config.txt").write_text(dump_config(config, include_output_dir=False))
    emit_table(report, out / "table.csv")
    emit_figure_data(report, out)
    for run in report.runs:
        run_dir = out / str(run.max_retx) / str(run.seed_index)
        items = [("max_retx", run.max_retx), ("seed_index", run.seed_index), ("error", run.error or "none")]
        if run.ok:
            items.append(("utilization", _fmt(run.utilization)))
            items.extend(sorted(run.counters.items()))
            for w in config.bin_widths:
                tag = format_seconds(w)
                write_trace_csv(run.traces[w], run_dir / f"trace_{tag}.csv")
                est = run.estimates[w]
                items.append((f"H.{tag}", _fmt(est.H if est else None)))
                if est is not None:
                    items.append((f"r_squared.{tag}", _fmt(est.r_squared)))
                    write_pox_csv(est.points, run_dir / f"pox_{tag}.csv")
                    write_pox_csv(est.points, out / "pox" / f"{run.max_retx}_{run.seed_index}_{tag}.csv")
        _write_kv(run_dir / "run.txt", items)
    summary = [("runs", len(report.runs)), ("failures", len(report.failures))]
    for row in report.table_rows():
        key = f"{row['max_retx']}.{row['bin_width_s']}"
        summary.append((f"mean_H.{key}", _fmt(row["mean_H"])))
        summary.append((f"sd_H.{key}", _fmt(row["sd_H"])))
    for run in report.runs:
        key = f"{run.max_retx}.{run.seed_index}"
        if run.ok:
            summary.append((f"utilization.{key}", _fmt(run.utilization)))
            summary.append((f"collisions.{key}", run.counters["collisions"]))
            summary.append((f"collision_drops.{key}", run.counters["collision_drops"]))
            summary.append((f"overflow_drops.{key}", run.counters["overflow_drops"]))
        else:
            summary.append((f"error.{key}", run.error))
    _write_kv(out / "summary.txt", summary)
