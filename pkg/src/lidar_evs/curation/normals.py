from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from ..errors import NeighborhoodTooSmall

logger = logging.getLogger(__name__)

DEFAULT_K = 16
_CHUNK = 65536
_COINCIDENT_EIGEN = 1e-18
_COLLINEAR_RATIO = 1e-9


@dataclass(frozen=True, eq=False)
class NormalEstimate:
    normals: np.ndarray
    degenerate: np.ndarray

    @property
    def degenerate_count(self) -> int:
        return int(self.degenerate.sum())


def _unit(vectors: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    return np.where(norms > 0.0, vectors / np.where(norms > 0.0, norms, 1.0), fallback)


def sensor_facing_normals(cloud: Any, origins: Any) -> NormalEstimate:
    """Unit vectors from every point toward its sensor origin, all flagged degenerate."""
    points = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    origin = np.broadcast_to(np.asarray(origins, dtype=np.float64).reshape(-1, 3), points.shape)
    normals = _unit(origin - points, np.array([0.0, 0.0, 1.0]))
    return NormalEstimate(normals=normals, degenerate=np.ones(len(points), dtype=bool))


def estimate_normals(cloud: Any, origins: Any, k: int = DEFAULT_K, workers: int = 1) -> NormalEstimate:
    """PCA plane-fit normals over the k nearest neighbours of every point.

    Each normal faces its point's original sensor origin. Coincident or
    collinear neighbourhoods fall back to the unit vector toward that origin
    and are flagged in ``degenerate``.
    """
    points = np.asarray(cloud, dtype=np.float64).reshape(-1, 3)
    origin = np.broadcast_to(np.asarray(origins, dtype=np.float64).reshape(-1, 3), points.shape)
    if k < 3:
        raise NeighborhoodTooSmall(f"normal estimation needs k >= 3, got {k}")
    if len(points) < k:
        raise NeighborhoodTooSmall(f"cloud of {len(points)} points is smaller than k={k}")

    tree = cKDTree(points)
    normals = np.empty_like(points)
    degenerate = np.zeros(len(points), dtype=bool)
    up = np.array([0.0, 0.0, 1.0])

    for start in range(0, len(points), _CHUNK):
        stop = min(start + _CHUNK, len(points))
        _, neighbors = tree.query(points[start:stop], k=k, workers=workers)
        patch = points[neighbors.reshape(stop - start, k)]
        centered = patch - patch.mean(axis=1, keepdims=True)
        covariance = np.einsum("nki,nkj->nij", centered, centered) / k
        eigenvalues, eigenvectors = np.linalg.eigh(covariance)

        flat = (eigenvalues[:, 2] <= _COINCIDENT_EIGEN) | (
            eigenvalues[:, 1] <= _COLLINEAR_RATIO * eigenvalues[:, 2]
        )
        toward = _unit(origin[start:stop] - points[start:stop], up)
        chunk_normals = np.where(flat[:, None], toward, eigenvectors[:, :, 0])
        flip = np.einsum("ni,ni->n", chunk_normals, toward) < 0.0
        chunk_normals[flip] *= -1.0

        normals[start:stop] = _unit(chunk_normals, toward)
        degenerate[start:stop] = flat

    if degenerate.any():
        logger.warning("%d of %d points had degenerate neighbourhoods; normals point at the sensor.",
                       int(degenerate.sum()), len(points))
    return NormalEstimate(normals=normals, degenerate=degenerate)
