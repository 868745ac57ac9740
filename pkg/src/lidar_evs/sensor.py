"""Projection between sensor-frame points and the range-map grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .geom import SphericalPoint, cartesian_to_spherical, spherical_to_cartesian
from .models import EMPTY_RANGE, RangeMap, SensorModel


@dataclass(frozen=True, eq=False)
class NearestHits:
    """Winning point per occupied cell, ordered by flat cell id."""

    indices: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    ranges: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def project_to_cells(spherical: Any, m: SensorModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized cell lookup for (N, 3) azimuth/elevation/range rows.

    Returns integer rows, cols and a validity mask; invalid entries hold 0.
    """
    sph = np.asarray(spherical, dtype=np.float64).reshape(-1, 3)
    u = (sph[:, 0] - m.azimuth_fov[0]) * m.width / m.azimuth_span
    v = (sph[:, 1] - m.elevation_fov[0]) * m.height / m.elevation_span

    valid = np.isfinite(u) & np.isfinite(v) & (v >= 0.0) & (v < m.height)
    if m.is_full_circle:
        u = np.mod(u, m.width)
    else:
        valid &= (u >= 0.0) & (u < m.width)

    # round half up
    rows = np.floor(np.where(valid, v, 0.0) + 0.5).astype(np.int64)
    cols = np.floor(np.where(valid, u, 0.0) + 0.5).astype(np.int64)
    valid &= rows < m.height
    if m.is_full_circle:
        cols %= m.width
    else:
        valid &= cols < m.width

    rows[~valid] = 0
    cols[~valid] = 0
    return rows, cols, valid


def project_to_cell(s: SphericalPoint, m: SensorModel) -> tuple[int, int] | None:
    """Cell (row, col) of a spherical point, or None when it falls outside the FoV."""
    rows, cols, valid = project_to_cells([[s.azimuth, s.elevation, s.range]], m)
    if not valid[0]:
        return None
    return int(rows[0]), int(cols[0])


def nearest_hits(points: Any, m: SensorModel) -> NearestHits:
    """Per-cell minimum by (range, original index) over in-FoV, in-range points.

    The reduction key is total, so the winners do not depend on evaluation
    order.
    """
    sph = cartesian_to_spherical(points)
    rows, cols, valid = project_to_cells(sph, m)
    ranges = sph[:, 2]
    valid &= (ranges > 0.0) & (ranges <= m.max_range)

    candidates = np.flatnonzero(valid)
    cells = rows[candidates] * m.width + cols[candidates]
    order = np.lexsort((candidates, ranges[candidates], cells))
    sorted_cells = cells[order]
    first = np.ones(len(order), dtype=bool)
    first[1:] = sorted_cells[1:] != sorted_cells[:-1]

    winners = candidates[order][first]
    return NearestHits(
        indices=winners,
        rows=rows[winners],
        cols=cols[winners],
        ranges=ranges[winners],
    )


def rasterize(points: Any, intensities: Any, m: SensorModel) -> RangeMap:
    values = np.asarray(intensities, dtype=np.float64).reshape(-1)
    hits = nearest_hits(points, m)

    rng = np.full((m.height, m.width), EMPTY_RANGE, dtype=np.float32)
    intensity = np.zeros((m.height, m.width), dtype=np.float32)
    occupancy = np.zeros((m.height, m.width), dtype=bool)
    rng[hits.rows, hits.cols] = hits.ranges
    intensity[hits.rows, hits.cols] = values[hits.indices]
    occupancy[hits.rows, hits.cols] = True
    return RangeMap(m.height, m.width, rng, intensity, occupancy)


def cell_centers(m: SensorModel) -> tuple[np.ndarray, np.ndarray]:
    """Azimuth of every column center and elevation of every row center."""
    azimuth = m.azimuth_fov[0] + np.arange(m.width) * (m.azimuth_span / m.width)
    elevation = m.elevation_fov[0] + np.arange(m.height) * (m.elevation_span / m.height)
    return azimuth, elevation


def range_map_to_points(rm: RangeMap, m: SensorModel) -> tuple[np.ndarray, np.ndarray]:
    """Back-project occupied cells along their center rays.

    Returns sensor-frame points and their intensities, row-major cell order.
    """
    azimuth, elevation = cell_centers(m.with_resolution(rm.height, rm.width))
    rows, cols = np.nonzero(rm.occupancy)
    spherical = np.column_stack([azimuth[cols], elevation[rows], rm.range[rows, cols].astype(np.float64)])
    return spherical_to_cartesian(spherical), rm.intensity[rows, cols].astype(np.float64)
