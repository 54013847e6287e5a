# reconet/evaluation/benchmark.py
import logging
import os
import platform
import time
from typing import Tuple

import numpy as np

from reconet.schemas.evaluation import FpsReport
from reconet.stylenet.network import ReCoNet
from reconet.utils.errors import ShapeError

logger = logging.getLogger(__name__)


def hardware_descriptor() -> str:
    cpu = platform.processor() or platform.machine() or "unknown-cpu"
    return (f"{cpu}; {os.cpu_count()} logical cpus; {platform.system()} {platform.release()}; "
            f"python {platform.python_version()}; numpy {np.__version__}")


def fps_benchmark(
    model: ReCoNet,
    resolution: Tuple[int, int] = (640, 360),
    warmup_iters: int = 3,
    timed_iters: int = 10,
    seed: int = 0,
) -> FpsReport:
    """Per-frame encode+decode latency on synthetic frames, one frame at a time.

    CPU numpy timings; not comparable with GPU figures.
    """
    width, height = resolution
    if width % 4 or height % 4:
        raise ShapeError(message="Benchmark resolution must be divisible by 4", details=f"{width}x{height}")
    if timed_iters < 1:
        raise ValueError("timed_iters must be at least 1")
    frame = np.random.default_rng(seed).random((3, height, width), dtype=np.float32)
    for _ in range(warmup_iters):
        model.stylize_array(frame)
    latencies = []
    for _ in range(timed_iters):
        start = time.perf_counter()
        model.stylize_array(frame)
        latencies.append((time.perf_counter() - start) * 1000.0)
    mean_ms = float(np.mean(latencies))
    report = FpsReport(
        resolution=f"{width}x{height}",
        warmup_iters=warmup_iters,
        timed_iters=timed_iters,
        hardware=hardware_descriptor(),
        latencies_ms=latencies,
        median_ms=float(np.median(latencies)),
        mean_ms=mean_ms,
        fps=1000.0 / mean_ms if mean_ms > 0 else float("inf"),
    )
    logger.info(f"Benchmark {report.resolution}: median {report.median_ms:.2f} ms, {report.fps:.2f} fps")
    return report


def halving_sanity(model: ReCoNet, resolution: Tuple[int, int], timed_iters: int = 3) -> bool:
    """Half the resolution should give a strictly lower median latency on a compute-bound run."""
    width, height = resolution
    half = (width // 2 // 4 * 4, height // 2 // 4 * 4)
    full_report = fps_benchmark(model, resolution, warmup_iters=1, timed_iters=timed_iters)
    half_report = fps_benchmark(model, half, warmup_iters=1, timed_iters=timed_iters)
    ok = half_report.median_ms < full_report.median_ms
    if not ok:
        logger.warning(f"Median latency did not drop at {half[0]}x{half[1]}: "
                       f"{half_report.median_ms:.2f} ms vs {full_report.median_ms:.2f} ms")
    return ok
