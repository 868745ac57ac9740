"""Spatially-constrained dropout and its inference-time opacity compensation."""

from __future__ import annotations

import logging
from typing import Any

import numpy as np

from . import rng
from .errors import ConfigValidationError, LengthMismatch
from .geom import Pose
from .models import DropoutMask, GaussianSet, RoiSpec

logger = logging.getLogger(__name__)


def roi_mask(means: Any, sensor: Pose, spec: RoiSpec) -> np.ndarray:
    """Near-field, in-elevation Gaussians.

    Elevation is measured in the sensor frame; the interval is half-open
    ``[elevation_min, elevation_max)``. A mean sitting on the sensor origin
    gets elevation 0.
    """
    mu = np.asarray(means, dtype=np.float64).reshape(-1, 3)
    view = (mu - sensor.translation) @ sensor.rotation
    distance = np.linalg.norm(view, axis=1)
    on_origin = distance == 0.0
    elevation = np.arcsin(np.clip(view[:, 2] / np.where(on_origin, 1.0, distance), -1.0, 1.0))
    elevation[on_origin] = 0.0
    return (distance <= spec.d_max) & (spec.elevation_min <= elevation) & (elevation < spec.elevation_max)


def _check_rate(rate: float) -> None:
    if not 0.0 <= rate < 1.0:
        raise ConfigValidationError(f"drop rate must lie in [0, 1), got {rate}")


def expected_retention(rate: float) -> float:
    _check_rate(rate)
    return 1.0 - rate


def sample_mask(roi: Any, rate: float, seed: int) -> DropoutMask:
    """Drop in-ROI Gaussian i when its own draw u_i falls below ``rate``."""
    _check_rate(rate)
    in_roi = np.asarray(roi, dtype=bool).reshape(-1)
    draws = rng.uniforms(seed, rng.DROPOUT, len(in_roi))
    return DropoutMask(roi=in_roi, drop=in_roi & (draws < rate), seed=int(seed))


def compensate_opacity(opacities: Any, roi: Any, rate: float) -> np.ndarray:
    """Scale in-ROI opacities by the retention probability; others are returned as is."""
    values = np.asarray(opacities, dtype=np.float64).reshape(-1)
    in_roi = np.asarray(roi, dtype=bool).reshape(-1)
    if len(values) != len(in_roi):
        raise LengthMismatch(f"{len(values)} opacities but {len(in_roi)} ROI flags")
    return np.where(in_roi, values * expected_retention(rate), values)


def apply_mask(gaussians: GaussianSet, mask: DropoutMask) -> GaussianSet:
    if len(mask) != len(gaussians):
        raise LengthMismatch(f"mask covers {len(mask)} Gaussians, set has {len(gaussians)}")
    survivors = gaussians.subset(~mask.drop)
    logger.debug("Dropout kept %d of %d Gaussians.", len(survivors), len(gaussians))
    return survivors


def compensate(gaussians: GaussianSet, sensor: Pose, spec: RoiSpec) -> GaussianSet:
    roi = roi_mask(gaussians.means, sensor, spec)
    return gaussians.with_opacities(compensate_opacity(gaussians.opacities, roi, spec.drop_rate))
