from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..geom import Pose, invert
from ..models import FusionConfig, LidarFrame, PseudoScan, SensorModel
from .fusion import fuse, move_points
from .intensity import adjust_intensity
from .normals import DEFAULT_K, estimate_normals, sensor_facing_normals
from .raycast import curled_indices

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CurationOptions:
    normal_k: int = DEFAULT_K
    adjust_intensity: bool = True
    workers: int = 1


def curate(
    frames: Sequence[LidarFrame],
    current_index: int,
    m: SensorModel,
    cfg: FusionConfig,
    target: Pose,
    options: CurationOptions | None = None,
) -> PseudoScan:
    """Pseudo scan for ``target``: fuse into the target view, curl, re-light.

    Everything is computed in the target sensor frame. Normals are fitted on
    the whole fused cloud before curling, and only when intensity adjustment
    is on; the returned scan then carries them. Intensity adjustment uses
    each point's own source-frame sensor position as the original viewpoint.
    """
    options = options or CurationOptions()
    fused = fuse(frames, current_index, cfg, view=target)
    keep = curled_indices(fused.points, m)

    local = fused.points[keep]
    intensities = fused.intensities[keep]
    normals = None
    degenerate = 0
    grazing = 0
    if options.adjust_intensity:
        sensor_origins = move_points(np.stack([frame.pose.translation for frame in frames]), invert(target))
        origins = sensor_origins[fused.source_frame_ids]
        if len(fused) >= options.normal_k:
            estimate = estimate_normals(fused.points, origins, k=options.normal_k, workers=options.workers)
        else:
            logger.warning(
                "Fused cloud of %d points is smaller than k=%d; normals point at the sensor.",
                len(fused), options.normal_k,
            )
            estimate = sensor_facing_normals(fused.points, origins)
        normals = estimate.normals[keep]
        degenerate = estimate.degenerate_count
        intensities, passthrough = adjust_intensity(intensities, normals, local - origins[keep], local)
        grazing = int(passthrough.sum())
        if grazing:
            logger.warning("%d surviving points were grazing in their source view; intensity kept.", grazing)

    logger.info(
        "Curated frame %d: %d fused points, %d survive curling.", current_index, len(fused), len(keep)
    )
    return PseudoScan(
        points=local,
        intensities=intensities,
        source_frame_ids=fused.source_frame_ids[keep],
        normals=normals,
        pose=target,
        timestamp=frames[current_index].timestamp,
        provenance={
            "current_index": current_index,
            "window": cfg.window,
            "fused_point_count": len(fused),
            "survivor_count": int(len(keep)),
            "source_frame_ids": sorted({int(i) for i in fused.source_frame_ids.tolist()}),
            "degenerate_normal_count": degenerate,
            "grazing_passthrough_count": grazing,
            "intensity_adjusted": options.adjust_intensity,
        },
    )
