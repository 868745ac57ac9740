from __future__ import annotations

from typing import Any

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, EmptyCloud, NoOverlap
from .models import LidarMetrics, RangeMap, SensorModel
from .sensor import range_map_to_points


def _check_dimensions(pred: RangeMap, gt: RangeMap) -> None:
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionMismatch(
            f"range maps differ in size: pred {pred.height}x{pred.width}, gt {gt.height}x{gt.width}"
        )


def _joint(pred: RangeMap, gt: RangeMap) -> np.ndarray:
    _check_dimensions(pred, gt)
    joint = pred.occupancy & gt.occupancy
    if not joint.any():
        raise NoOverlap("no cell is occupied in both range maps")
    return joint


def depth_error(pred: RangeMap, gt: RangeMap) -> float:
    """Median squared range error over jointly occupied cells, in m^2."""
    joint = _joint(pred, gt)
    diff = pred.range[joint].astype(np.float64) - gt.range[joint].astype(np.float64)
    return float(np.median(diff * diff))


def intensity_rmse(pred: RangeMap, gt: RangeMap) -> float:
    joint = _joint(pred, gt)
    diff = pred.intensity[joint].astype(np.float64) - gt.intensity[joint].astype(np.float64)
    return float(np.sqrt(np.mean(diff * diff)))


def raydrop_accuracy(pred: RangeMap, gt: RangeMap) -> float:
    _check_dimensions(pred, gt)
    return float(np.count_nonzero(pred.occupancy == gt.occupancy) / pred.occupancy.size)


def chamfer(pred: Any, gt: Any, workers: int = 1) -> float:
    """Symmetric mean of un-squared nearest-neighbour distances, halved."""
    a = np.asarray(pred, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(gt, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud(f"chamfer needs two non-empty clouds, got {len(a)} and {len(b)} points")

    a_to_b, _ = cKDTree(b).query(a, k=1, workers=workers)
    b_to_a, _ = cKDTree(a).query(b, k=1, workers=workers)
    return float(0.5 * (np.mean(a_to_b) + np.mean(b_to_a)))


def evaluate_range_maps(pred: RangeMap, gt: RangeMap, sensor: SensorModel, workers: int = 1) -> LidarMetrics:
    _check_dimensions(pred, gt)
    pred_points, _ = range_map_to_points(pred, sensor)
    gt_points, _ = range_map_to_points(gt, sensor)
    return LidarMetrics(
        depth_mse_median=depth_error(pred, gt),
        chamfer=chamfer(pred_points, gt_points, workers=workers),
        intensity_rmse=intensity_rmse(pred, gt),
        raydrop_accuracy=raydrop_accuracy(pred, gt),
    )


def evaluate_clouds(pred: Any, gt: Any, workers: int = 1) -> LidarMetrics:
    return LidarMetrics(chamfer=chamfer(pred, gt, workers=workers))
