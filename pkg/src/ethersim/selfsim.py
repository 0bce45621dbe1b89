"""Rescaled adjusted range (R/S) analysis and Hurst-exponent estimation.

For a block ``X_1..X_n`` with mean ``m`` the adjusted partial sums are
``W_k = X_1 + ... + X_k - k*m``; the range ``R = max(0, W) - min(0, W)`` is
rescaled by the population standard deviation ``S``. Averaging ``R/S`` over
non-overlapping blocks of length ``n`` for a range of ``n`` gives a pox
diagram whose log-log slope estimates ``H`` in ``E[R/S] ~ c n^H``.

Synthetic white noise and exact fractional Gaussian noise generators are
included for calibrating the estimator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class UndefinedStatistic(ValueError):
    """R/S is undefined because the series has zero variance."""


class InsufficientData(ValueError):
    """Too few usable block lengths for a log-log fit."""


MIN_POINTS = 4
MIN_BLOCK = 8
MIN_SERIES = 32
DEFAULT_POINTS = 12


@dataclass(frozen=True)
class RSPoint:
    n: int
    mean_rs: float
    blocks: int = 0


@dataclass(frozen=True)
class HurstEstimate:
    H: float
    c: float
    r_squared: float
    points: list[RSPoint] = field(default_factory=list)

    @property
    def in_self_similar_band(self) -> bool:
        return 0.5 < self.H < 1.0

    def summary(self) -> dict:
        return {"H": self.H, "c": self.c, "r_squared": self.r_squared, "points": len(self.points)}


def rs_statistic(series) -> float:
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("R/S needs a 1-d series of length >= 2")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    dev = x - x.mean()
    s = np.sqrt(np.mean(dev * dev))
    if s == 0 or s <= 1e-14 * np.max(np.abs(x)):
        raise UndefinedStatistic("zero-variance series")
    w = np.cumsum(dev)
    r = max(0.0, w.max()) - min(0.0, w.min())
    return float(r / s)


def _block_rs(x: np.ndarray, n: int) -> np.ndarray:
    """R/S of every full block of length ``n``; NaN where the block is constant."""
    k = len(x) // n
    blocks = x[: k * n].reshape(k, n)
    dev = blocks - blocks.mean(axis=1, keepdims=True)
    s = np.sqrt(np.mean(dev * dev, axis=1))
    w = np.cumsum(dev, axis=1)
    r = np.maximum(w.max(axis=1), 0.0) - np.minimum(w.min(axis=1), 0.0)
    scale = np.max(np.abs(blocks), axis=1)
    ok = s > 1e-14 * scale
    out = np.full(k, np.nan)
    out[ok] = r[ok] / s[ok]
    return out


def default_block_lengths(length: int, points: int = DEFAULT_POINTS) -> list[int]:
    """Log-spaced block lengths in ``[max(8, N/256), N/2]``."""
    lo = max(MIN_BLOCK, length // 256)
    hi = length // 2
    if hi < lo:
        return []
    grid = np.unique(np.round(np.geomspace(lo, hi, points)).astype(int))
    return [int(n) for n in grid]


def pox_points(series, block_lengths=None) -> list[RSPoint]:
    x = np.asarray(series, dtype=float)
    if len(x) < MIN_SERIES:
        raise InsufficientData(f"series of length {len(x)} is shorter than {MIN_SERIES}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")
    if block_lengths is None:
        block_lengths = default_block_lengths(len(x))
    points = []
    for n in sorted(set(int(b) for b in block_lengths)):
        if not MIN_BLOCK <= n <= len(x):
            raise ValueError(f"block length {n} outside [{MIN_BLOCK}, {len(x)}]")
        rs = _block_rs(x, n)
        valid = rs[~np.isnan(rs)]
        if len(valid):
            points.append(RSPoint(n, float(valid.mean()), len(valid)))
    if len(points) < MIN_POINTS:
        raise InsufficientData(f"only {len(points)} usable block lengths, need {MIN_POINTS}")
    return points


def fit_pox(points) -> HurstEstimate:
    """Ordinary least squares of log(mean R/S) on log(n)."""
    points = sorted(points, key=lambda p: p.n)
    if len(points) < MIN_POINTS:
        raise InsufficientData(f"only {len(points)} points, need {MIN_POINTS}")
    lx = np.log([p.n for p in points])
    ly = np.log([p.mean_rs for p in points])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return HurstEstimate(float(slope), float(np.exp(intercept)), r2, points)


def hurst_estimate(series, block_lengths=None) -> HurstEstimate:
    return fit_pox(pox_points(series, block_lengths))


def gen_white_noise(n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.random.default_rng(seed).standard_normal(n)


def fgn_autocovariance(k, hurst: float):
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def gen_fgn(n: int, hurst: float, seed) -> np.ndarray:
    """Unit-variance fractional Gaussian noise by circulant embedding (Davies-Harte)."""
    if n < 1 or n & (n - 1):
        raise ValueError("n must be a power of two")
    if not 0 < hurst < 1:
        raise ValueError("hurst must lie in (0, 1)")
    gamma = fgn_autocovariance(np.arange(n + 1), hurst)
    row = np.concatenate([gamma, gamma[n - 1 : 0 : -1]])
    eig = np.fft.fft(row).real
    m = 2 * n
    if np.min(eig) < -1e-10 * np.max(eig):
        raise AssertionError("circulant embedding is not non-negative definite")
    eig = np.clip(eig, 0.0, None)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(eig / m) * z)
    return y[:n].real.copy()


def write_pox_csv(points, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "mean_rs"])
        for p in points:
            w.writerow([p.n, repr(p.mean_rs)])


def format_estimate(est: HurstEstimate) -> str:
    return "".join(f"{k}={v!r}\n" for k, v in est.summary().items())
