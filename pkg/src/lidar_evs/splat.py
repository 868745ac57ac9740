"""Forward-only spherical Gaussian range-map renderer.

Gaussians are moved into the sensor frame, their means and covariances are
expressed in (azimuth, elevation, range) through the spherical Jacobian, and
each cell center inside a Gaussian's 3-sigma angular ellipse receives
``alpha = o * exp(-0.5 * d^T Sigma_2d^-1 d)``. Contributions are composited
front to back by mean range. Accumulated alpha doubles as the ray-drop proxy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import AllGaussiansDegenerate
from .geom import Pose, cartesian_to_spherical, quaternion_to_rotation, spherical_jacobians
from .models import EMPTY_RANGE, GaussianSet, RangeMap, SensorModel

logger = logging.getLogger(__name__)

FOOTPRINT_SIGMA = 3.0
ALPHA_FLOOR = 1.0 / 255.0
OCCUPANCY_ALPHA = 0.5
POLE_RHO = 1e-6


@dataclass(frozen=True, eq=False)
class SphericalGaussians:
    means: np.ndarray
    covariances: np.ndarray
    indices: np.ndarray
    skipped: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class RenderResult:
    range_map: RangeMap
    alpha: np.ndarray
    skipped: np.ndarray


def covariances(scales: Any, quats: Any) -> np.ndarray:
    s2 = np.asarray(scales, dtype=np.float64).reshape(-1, 3) ** 2
    rotation = quaternion_to_rotation(np.asarray(quats, dtype=np.float64).reshape(-1, 4))
    return np.einsum("nij,nj,nkj->nik", rotation, s2, rotation)


def covariance(scale: Any, quat: Any) -> np.ndarray:
    """R diag(S^2) R^T for a single Gaussian."""
    return covariances(scale, quat)[0]


def to_sensor_spherical(g: GaussianSet, sensor: Pose) -> SphericalGaussians:
    rotation = sensor.rotation
    local = (g.means - sensor.translation) @ rotation
    valid = np.hypot(local[:, 0], local[:, 1]) > POLE_RHO
    indices = np.flatnonzero(valid)
    skipped = np.flatnonzero(~valid)
    if len(skipped):
        logger.warning("Skipped %d pole-degenerate Gaussians.", len(skipped))

    world_cov = covariances(g.scales[valid], g.rotations[valid])
    local_cov = np.einsum("ji,njk,kl->nil", rotation, world_cov, rotation)
    jac = spherical_jacobians(local[valid])
    spherical_cov = np.einsum("nij,njk,nlk->nil", jac, local_cov, jac)

    return SphericalGaussians(
        means=cartesian_to_spherical(local[valid]),
        covariances=spherical_cov,
        indices=indices,
        skipped=skipped,
    )


def _wrap_angle(angle: np.ndarray) -> np.ndarray:
    return np.mod(angle + np.pi, 2.0 * np.pi) - np.pi


def _footprint_pairs(
    sg: SphericalGaussians, m: SensorModel
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(gaussian slot, row, unwrapped col, wrapped col) for every candidate cell."""
    cols_per_rad = m.width / m.azimuth_span
    rows_per_rad = m.height / m.elevation_span
    sigma_az = np.sqrt(sg.covariances[:, 0, 0])
    sigma_el = np.sqrt(sg.covariances[:, 1, 1])
    u = (sg.means[:, 0] - m.azimuth_fov[0]) * cols_per_rad
    v = (sg.means[:, 1] - m.elevation_fov[0]) * rows_per_rad
    half_u = FOOTPRINT_SIGMA * sigma_az * cols_per_rad
    half_v = FOOTPRINT_SIGMA * sigma_el * rows_per_rad

    c0 = np.ceil(u - half_u).astype(np.int64)
    c1 = np.floor(u + half_u).astype(np.int64)
    r0 = np.maximum(np.ceil(v - half_v), 0).astype(np.int64)
    r1 = np.minimum(np.floor(v + half_v), m.height - 1).astype(np.int64)
    if m.is_full_circle:
        c1 = np.minimum(c1, c0 + m.width - 1)
    else:
        c0 = np.maximum(c0, 0)
        c1 = np.minimum(c1, m.width - 1)

    n_cols = np.maximum(c1 - c0 + 1, 0)
    n_rows = np.maximum(r1 - r0 + 1, 0)
    n_pairs = n_cols * n_rows

    slot = np.repeat(np.arange(len(sg)), n_pairs)
    offset = np.arange(int(n_pairs.sum())) - np.repeat(np.cumsum(n_pairs) - n_pairs, n_pairs)
    row = r0[slot] + offset // n_cols[slot]
    col = c0[slot] + offset % n_cols[slot]
    return slot, row, col, np.mod(col, m.width)


def render_range_map(g: GaussianSet, sensor: Pose, m: SensorModel) -> RenderResult:
    cells = m.cell_count
    if len(g) == 0:
        return RenderResult(RangeMap.empty(m.height, m.width), np.zeros((m.height, m.width)), np.empty(0, np.int64))

    sg = to_sensor_spherical(g, sensor)
    if len(sg) == 0:
        raise AllGaussiansDegenerate(f"all {len(g)} Gaussians sit on the sensor's elevation poles")

    cov2d = sg.covariances[:, :2, :2]
    det = cov2d[:, 0, 0] * cov2d[:, 1, 1] - cov2d[:, 0, 1] * cov2d[:, 1, 0]
    usable = det > 0.0
    conic_aa = np.where(usable, cov2d[:, 1, 1], 0.0) / np.where(usable, det, 1.0)
    conic_ee = np.where(usable, cov2d[:, 0, 0], 0.0) / np.where(usable, det, 1.0)
    conic_ae = np.where(usable, -cov2d[:, 0, 1], 0.0) / np.where(usable, det, 1.0)

    slot, row, col, wrapped = _footprint_pairs(sg, m)
    d_az = _wrap_angle(m.azimuth_fov[0] + col * (m.azimuth_span / m.width) - sg.means[slot, 0])
    d_el = m.elevation_fov[0] + row * (m.elevation_span / m.height) - sg.means[slot, 1]
    maha = conic_aa[slot] * d_az**2 + 2.0 * conic_ae[slot] * d_az * d_el + conic_ee[slot] * d_el**2
    alpha = g.opacities[sg.indices[slot]] * np.exp(-0.5 * maha)

    keep = usable[slot] & (maha <= FOOTPRINT_SIGMA**2) & (alpha >= ALPHA_FLOOR)
    slot, alpha = slot[keep], alpha[keep]
    cell = row[keep] * m.width + wrapped[keep]
    depth = sg.means[slot, 2]

    order = np.lexsort((sg.indices[slot], depth, cell))
    slot, alpha, cell, depth = slot[order], alpha[order], cell[order], depth[order]

    # exclusive per-cell transmittance prod_{j<i} (1 - alpha_j)
    log_keep = np.log1p(-alpha)
    exclusive = np.cumsum(log_keep) - log_keep
    starts = np.ones(len(cell), dtype=bool)
    starts[1:] = cell[1:] != cell[:-1]
    segment = np.cumsum(starts) - 1
    transmittance = np.exp(exclusive - exclusive[starts][segment])
    weight = alpha * transmittance

    accumulated = np.bincount(cell, weights=weight, minlength=cells)
    range_sum = np.bincount(cell, weights=weight * depth, minlength=cells)
    feature_sum = np.bincount(cell, weights=weight * g.features[sg.indices[slot]], minlength=cells)

    occupied = accumulated >= OCCUPANCY_ALPHA
    safe = np.where(occupied, accumulated, 1.0)
    blended_range = range_sum / safe
    occupied &= (blended_range > 0.0) & (blended_range <= m.max_range)
    blended_feature = np.clip(feature_sum / safe, 0.0, 1.0)

    range_map = RangeMap(
        m.height,
        m.width,
        np.where(occupied, blended_range, EMPTY_RANGE),
        np.where(occupied, blended_feature, 0.0),
        occupied,
    )
    logger.debug("Rendered %d Gaussians into %d occupied cells.", len(sg), range_map.occupied_count)
    return RenderResult(range_map, accumulated.reshape(m.height, m.width), sg.skipped)
