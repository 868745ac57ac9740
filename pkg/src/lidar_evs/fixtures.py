"""Canonical synthetic scenes for tests, demos and benchmarks.

Scans follow one ray per cell, either straight from a surface layout
(two-plane occlusion) or by ray-tracing axis-aligned boxes (corridor). The
Gaussian grid sits exactly on cell centers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import rng
from .geom import Pose, cartesian_to_spherical, spherical_to_cartesian
from .models import GaussianSet, LidarFrame, SensorModel
from .sensor import cell_centers

FIXTURES = "fixtures"
SCAN_INSET = 0.25


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    reflectance: float
    dynamic: bool = False


def cell_center_directions(m: SensorModel, inset: float = 0.0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit ray per cell (row-major) with its row and col.

    ``inset`` moves every ray that fraction of a cell up in both angles, so
    rays on the lower FoV edge still project into the grid after float32
    storage.
    """
    azimuth, elevation = cell_centers(m)
    azimuth = azimuth + inset * m.azimuth_span / m.width
    elevation = elevation + inset * m.elevation_span / m.height
    rows, cols = np.meshgrid(np.arange(m.height), np.arange(m.width), indexing="ij")
    rows, cols = rows.reshape(-1), cols.reshape(-1)
    spherical = np.column_stack([azimuth[cols], elevation[rows], np.ones(len(rows))])
    return spherical_to_cartesian(spherical), rows, cols


def two_plane_frame(
    m: SensorModel,
    near: float = 5.0,
    far: float = 10.0,
    coverage: float = 0.5,
) -> tuple[LidarFrame, int]:
    """A far surface on every cell ray and a near one on the first ``coverage`` of columns.

    Returns the frame (identity pose) and the number of covered columns.
    """
    directions, _, cols = cell_center_directions(m, inset=SCAN_INSET)
    covered_cols = int(round(coverage * m.width))
    covered = cols < covered_cols

    far_points = directions * far
    near_points = directions[covered] * near
    points = np.concatenate([far_points, near_points])
    intensities = np.concatenate([np.full(len(far_points), 0.4), np.full(len(near_points), 0.8)])
    frame = LidarFrame(
        points=points,
        intensities=intensities,
        dynamic_flags=np.zeros(len(points), dtype=bool),
        pose=Pose.identity(),
        timestamp=0,
    )
    return frame, covered_cols


def trace_boxes(origin: np.ndarray, directions: np.ndarray, boxes: Sequence[Box]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Nearest box hit along each ray (slab test).

    Returns hit distance (inf on miss), box index (-1 on miss), the hit face
    normal axis and |cos| of the incidence angle.
    """
    lo = np.array([box.lo for box in boxes], dtype=np.float64)
    hi = np.array([box.hi for box in boxes], dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inverse = 1.0 / directions
        t1 = (lo[None, :, :] - origin) * inverse[:, None, :]
        t2 = (hi[None, :, :] - origin) * inverse[:, None, :]
    t_near = np.nan_to_num(np.minimum(t1, t2), nan=-np.inf)
    t_far = np.nan_to_num(np.maximum(t1, t2), nan=np.inf)
    entry = t_near.max(axis=2)
    exit_ = t_far.min(axis=2)
    hit = (exit_ >= entry) & (entry > 1e-6)
    entry = np.where(hit, entry, np.inf)

    box_index = np.argmin(entry, axis=1)
    distance = entry[np.arange(len(directions)), box_index]
    missed = ~np.isfinite(distance)
    box_index[missed] = -1

    face_axis = np.argmax(t_near[np.arange(len(directions)), np.maximum(box_index, 0)], axis=1)
    cosine = np.abs(directions[np.arange(len(directions)), face_axis])
    return distance, box_index, face_axis, cosine


def scan_boxes(m: SensorModel, pose: Pose, boxes: Sequence[Box], timestamp: int) -> LidarFrame:
    """Simulated scan of ``boxes`` from ``pose``; one return per cell-center ray."""
    directions, _, _ = cell_center_directions(m, inset=SCAN_INSET)
    world_directions = directions @ pose.rotation.T
    distance, box_index, _, cosine = trace_boxes(pose.translation, world_directions, boxes)
    hit = (box_index >= 0) & (distance <= m.max_range)

    points = directions[hit] * distance[hit, None]
    reflectance = np.array([box.reflectance for box in boxes])[box_index[hit]]
    dynamic = np.array([box.dynamic for box in boxes], dtype=bool)[box_index[hit]]
    return LidarFrame(
        points=points,
        intensities=np.clip(reflectance * cosine[hit], 0.0, 1.0),
        dynamic_flags=dynamic,
        pose=pose,
        timestamp=timestamp,
    )


def corridor_boxes(vehicle_x: float) -> list[Box]:
    return [
        Box((-100.0, -10.0, -2.2), (100.0, 10.0, -2.0), 0.3),
        Box((-100.0, 7.0, -2.0), (100.0, 7.3, 5.0), 0.7),
        Box((-100.0, -7.3, -2.0), (100.0, -7.0, 5.0), 0.7),
        Box((100.0, -10.0, -2.0), (100.3, 10.0, 5.0), 0.5),
        Box((-100.3, -10.0, -2.0), (-100.0, 10.0, 5.0), 0.5),
        Box((4.0, 2.5, -2.0), (6.0, 4.5, 1.0), 0.9),
        Box((vehicle_x, -4.0, -2.0), (vehicle_x + 4.0, -2.0, -0.5), 0.6, dynamic=True),
    ]


def corridor_frames(m: SensorModel, count: int = 10, spacing: float = 1.5, current: int = 5) -> list[LidarFrame]:
    """A sensor driving down a walled corridor past an occluding block.

    A vehicle flagged dynamic moves along the opposite lane.
    """
    frames = []
    for index in range(count):
        x = (index - current) * spacing
        pose = Pose.from_translation([x, 0.0, 0.0])
        frames.append(scan_boxes(m, pose, corridor_boxes(vehicle_x=10.0 + 3.0 * index), timestamp=index * 100_000))
    return frames


def sphere_frame(count: int = 1000, radius: float = 1.0, sensor_at: Sequence[float] = (0.0, 0.0, 5.0), seed: int = 0) -> LidarFrame:
    """Points uniform on a sphere at the world origin, seen from ``sensor_at``."""
    directions = rng.stream(seed, FIXTURES, 1).normal(size=(count, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    pose = Pose.from_translation(sensor_at)
    return LidarFrame(
        points=directions * radius - pose.translation,
        intensities=np.full(count, 0.5),
        dynamic_flags=np.zeros(count, dtype=bool),
        pose=pose,
        timestamp=0,
    )


def gaussian_grid(
    m: SensorModel,
    stride: int = 2,
    sigma: float = 1e-3,
    opacity: float = 0.9,
    ranges: tuple[float, float] = (5.0, 20.0),
    seed: int = 0,
) -> GaussianSet:
    """One tiny Gaussian on every ``stride``-th cell center, so no ray sees two."""
    directions, rows, cols = cell_center_directions(m)
    chosen = (rows % stride == 0) & (cols % stride == 0)
    directions = directions[chosen]
    # poles have no azimuth; keep the grid off them
    spherical = cartesian_to_spherical(directions)
    directions = directions[np.abs(spherical[:, 1]) < np.pi / 2 - 1e-3]

    stream = rng.stream(seed, FIXTURES, 2)
    distance = stream.uniform(ranges[0], ranges[1], size=len(directions))
    count = len(directions)
    return GaussianSet(
        means=directions * distance[:, None],
        scales=np.full((count, 3), sigma),
        rotations=np.tile([1.0, 0.0, 0.0, 0.0], (count, 1)),
        opacities=np.full(count, opacity),
        features=stream.uniform(0.1, 0.9, size=count),
    )


def random_cloud(count: int, extent: float = 60.0, seed: int = 0) -> np.ndarray:
    """Uniform points in a box around the sensor, used by the benchmark."""
    return rng.stream(seed, FIXTURES, 3).uniform(-extent, extent, size=(count, 3))
