"""Complexity measurement for the attention paths.

Times dense vs sampled-sparse attention over growing sequence lengths
and fits a log-log slope: dense work is quadratic in length (slope near
2), the sparse path keeps the score pass near ``L log L`` (slope well
below 2).  BLAS threading is pinned to one thread during measurement so
parallel speedups cannot masquerade as complexity changes.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .attention import AttentionConfig, dense_attention, probsparse_attention
from .config import SparseConfig

MODES = ("dense", "sparse")


@dataclass(frozen=True)
class BenchPoint:
    length: int
    median_seconds: float


@dataclass(frozen=True)
class BenchResult:
    mode: str
    points: tuple[BenchPoint, ...]
    slope: float


def _one_timing(mode: str, length: int, dim: int, heads: int, seed: int) -> float:
    gen = np.random.Generator(np.random.Philox(seed))
    q = gen.normal(size=(length, dim))
    k = gen.normal(size=(length, dim))
    v = gen.normal(size=(length, dim))
    cfg = AttentionConfig(model_dim=dim, num_heads=heads, causal=False)
    sparse = SparseConfig(seed=seed)
    start = time.perf_counter()
    if mode == "dense":
        dense_attention(q, k, v, cfg)
    else:
        probsparse_attention(q, k, v, cfg, sparse)
    return time.perf_counter() - start


def fitted_slope(points: list[BenchPoint]) -> float:
    """Least-squares slope of log(time) against log(length)."""
    xs = np.log([p.length for p in points])
    ys = np.log([max(p.median_seconds, 1e-12) for p in points])
    design = np.stack([xs, np.ones_like(xs)], axis=1)
    (slope, _), *_ = np.linalg.lstsq(design, ys, rcond=None)
    return float(slope)


def run_bench(
    mode: str,
    lengths: list[int],
    repeats: int = 5,
    dim: int = 64,
    heads: int = 4,
    seed: int = 0,
) -> BenchResult:
    """Median-of-``repeats`` timings per length, single-threaded BLAS."""
    if mode not in MODES:
        raise ValueError(f"unknown bench mode {mode!r}")
    if len(lengths) < 2:
        raise ValueError("need at least two lengths to fit a slope")
    if sorted(set(lengths)) != sorted(lengths):
        raise ValueError("lengths must be distinct")
    points = []
    with threadpool_limits(limits=1):
        # Warm-up outside timing: first-call overheads (allocator, caches).
        _one_timing(mode, min(lengths), dim, heads, seed)
        for length in lengths:
            times = [
                _one_timing(mode, length, dim, heads, seed + rep)
                for rep in range(repeats)
            ]
            points.append(BenchPoint(length=length, median_seconds=float(np.median(times))))
    return BenchResult(mode=mode, points=tuple(points), slope=fitted_slope(points))


def format_result(result: BenchResult) -> str:
    lines = [
        f"L={p.length:<6} median_s={p.median_seconds:.6f}" for p in result.points
    ]
    lines.append(f"mode={result.mode} slope={result.slope:.3f}")
    return "\n".join(lines)


def default_lengths() -> list[int]:
    return [512 * 2**i for i in range(int(math.log2(8192 // 512)) + 1)]
