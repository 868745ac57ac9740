"""Throughput harness for the CPU stages of the pipeline."""

from __future__ import annotations

import logging
import os
import platform
import time
from datetime import datetime, timezone
from typing import Any, Callable, Sequence

import numpy as np
import scipy

from .curation import fuse, occlusion_curl, raycast
from .errors import LidarEvsError
from .fixtures import random_cloud
from .geom import Pose
from .models import FusionConfig, GaussianSet, LidarFrame, PseudoScan, SensorModel
from .splat import render_range_map

logger = logging.getLogger(__name__)

DEFAULT_SIZES = (100_000, 1_000_000)
BENCH_FRAMES = 10


def machine_info() -> dict[str, Any]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "processor": platform.processor(),
        "cpu_count": os.cpu_count() or 1,
    }


def _frames(points: np.ndarray, count: int) -> list[LidarFrame]:
    frames = []
    for index, chunk in enumerate(np.array_split(points, count)):
        frames.append(
            LidarFrame(
                points=chunk,
                intensities=np.full(len(chunk), 0.5),
                dynamic_flags=np.zeros(len(chunk), dtype=bool),
                pose=Pose.from_translation([index * 0.5, 0.0, 0.0]),
                timestamp=index * 100_000,
            )
        )
    return frames


def _gaussians(points: np.ndarray) -> GaussianSet:
    count = len(points)
    return GaussianSet(
        means=points,
        scales=np.full((count, 3), 0.05),
        rotations=np.tile([1.0, 0.0, 0.0, 0.0], (count, 1)),
        opacities=np.full(count, 0.8),
        features=np.full(count, 0.5),
    )


def _stages(points: np.ndarray, m: SensorModel) -> list[tuple[str, Callable[[], int]]]:
    frames = _frames(points, BENCH_FRAMES)
    scan = PseudoScan(points=points, intensities=np.full(len(points), 0.5), source_frame_ids=np.zeros(len(points), np.int64))
    gaussians = _gaussians(points)
    return [
        ("fuse", lambda: len(fuse(frames, 0, FusionConfig(window=BENCH_FRAMES)))),
        ("raycast", lambda: int(raycast(points, m).sum())),
        ("curl", lambda: len(occlusion_curl(scan, m))),
        ("render", lambda: render_range_map(gaussians, Pose.identity(), m).range_map.occupied_count),
    ]


def run_bench(m: SensorModel, sizes: Sequence[int] = DEFAULT_SIZES, threads: int = 1, seed: int = 0) -> dict[str, Any]:
    """Time fuse, raycast, curl and render on random scenes of each size.

    A stage that raises is recorded under ``skipped`` and the run goes on.
    ``processed`` is the stage's output count, so it is deterministic.
    """
    stages: list[dict[str, Any]] = []
    skipped: list[dict[str, Any]] = []

    for size in sizes:
        points = random_cloud(int(size), seed=seed)
        for name, stage in _stages(points, m):
            logger.info("Benchmarking %s on %d points.", name, len(points))
            started = time.perf_counter()
            try:
                processed = stage()
            except (LidarEvsError, MemoryError) as exc:
                skipped.append({"stage": name, "scene_points": len(points), "reason": str(exc) or type(exc).__name__})
                logger.warning("Stage %s skipped at %d points: %s", name, len(points), exc)
                continue
            seconds = time.perf_counter() - started
            stages.append(
                {
                    "stage": name,
                    "scene_points": len(points),
                    "processed": int(processed),
                    "seconds": seconds,
                    "points_per_second": len(points) / seconds if seconds > 0 and len(points) else None,
                }
            )

    return {
        "generated_at_utc": datetime.now(timezone.utc).isoformat(),
        "machine": machine_info(),
        "threads": threads,
        "sensor": m.to_dict(),
        "stages": stages,
        "skipped": skipped,
    }
