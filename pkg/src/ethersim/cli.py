"""Command line entry point: ``ethersim run|analyze|selftest``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace

import numpy as np

from . import selfsim
from .experiment import ConfigError, ExperimentConfig, load_config, run_sweep
from .mac import backoff_slots
from .engine import rng_stream
from .trace import read_trace_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUN = 0, 1, 2


def cmd_run(args) -> int:
    try:
        config = load_config(args.config) if args.config else ExperimentConfig()
        if args.output_dir:
            config = replace(config, output_dir=args.output_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    report = run_sweep(config, jobs=args.jobs)
    elapsed = time.perf_counter() - start
    for row in report.table_rows():
        print(f"max_retx={row['max_retx']} width={row['bin_width_s']}s "
              f"mean_H={row['mean_H']:.3f} sd_H={row['sd_H']:.3f} n={row['n_seeds']}")
    print(f"{len(report.runs)} runs, {len(report.failures)} failed, {elapsed:.1f}s -> {config.output_dir}")
    return EXIT_RUN if report.failures else EXIT_OK


def cmd_analyze(args) -> int:
    try:
        trace = read_trace_csv(args.trace)
        est = selfsim.hurst_estimate(trace.bins)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUN
    if args.pox:
        selfsim.write_pox_csv(est.points, args.pox)
    sys.stdout.write(selfsim.format_estimate(est))
    return EXIT_OK


def _chi2_uniform(draws, k) -> float:
    from scipy.stats import chisquare

    counts = np.bincount(draws, minlength=k)
    return float(chisquare(counts).pvalue)


def selftest() -> list[tuple[str, bool, str]]:
    """Fast calibration checks; returns (name, passed, detail) rows."""
    rows = []
    h = np.mean([selfsim.hurst_estimate(selfsim.gen_white_noise(2**15, s)).H for s in range(20)])
    rows.append(("white-noise H in [0.47, 0.58]", 0.47 <= h <= 0.58, f"H={h:.4f}"))
    for target in (0.6, 0.7, 0.8, 0.9):
        h = np.mean([selfsim.hurst_estimate(selfsim.gen_fgn(2**15, target, s)).H for s in range(20)])
        rows.append((f"fGn H={target} within 0.05", abs(h - target) <= 0.05, f"H={h:.4f}"))
    ok = abs(selfsim.rs_statistic([1, 2, 3, 4]) - 2 / np.sqrt(1.25)) < 1e-12
    rows.append(("R/S of [1,2,3,4]", ok, f"{selfsim.rs_statistic([1, 2, 3, 4]):.6f}"))
    for i in (1, 3, 9):
        rng = rng_stream("selftest", i)
        draws = [backoff_slots(i, rng, 9) for _ in range(20000)]
        p = _chi2_uniform(draws, 2**i)
        ok = max(draws) < 2**i and p > 1e-3
        rows.append((f"backoff i={i} uniform", ok, f"p={p:.4f}"))
    return rows


def cmd_selftest(args) -> int:
    rows = selftest()
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_RUN


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ethersim", description="CSMA/CD backoff vs. traffic self-similarity")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a max_retx sweep and write the report tree")
    p.add_argument("config", nargs="?", help="key = value config file (defaults if omitted)")
    p.add_argument("-o", "--output-dir")
    p.add_argument("-j", "--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", help="R/S Hurst estimate of a bin_start_s,bytes trace")
    p.add_argument("trace")
    p.add_argument("--pox", help="write pox points (n,mean_rs) to this CSV")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("selftest", help="run estimator and backoff calibration checks")
    p.set_defaults(func=cmd_selftest)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
