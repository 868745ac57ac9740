from __future__ import annotations

import logging
from typing import Any, Sequence

import numpy as np

from ..errors import EmptyWindow
from ..geom import Pose, compose, invert
from ..models import FusedCloud, FusionConfig, LidarFrame

logger = logging.getLogger(__name__)

LEFT = 1
RIGHT = -1

_IDENTITY = Pose.identity()


def select_window(frames: Sequence[LidarFrame], current_index: int, window: int) -> list[int]:
    """Current frame first, then the ``window - 1`` frames nearest in timestamp.

    Ties on |dt| go to the lower frame index.
    """
    if not frames:
        raise EmptyWindow("no frames to fuse")
    if not 0 <= current_index < len(frames):
        raise IndexError(f"current index {current_index} outside 0..{len(frames) - 1}")

    reference = frames[current_index].timestamp
    others = sorted(
        (index for index in range(len(frames)) if index != current_index),
        key=lambda index: (abs(frames[index].timestamp - reference), index),
    )
    return [current_index, *others[: max(window - 1, 0)]]


def fuse(frames: Sequence[LidarFrame], current_index: int, cfg: FusionConfig, view: Pose | None = None) -> FusedCloud:
    """Union of the current frame and the static points of its neighbours.

    Points land in the world frame, or in the sensor frame of ``view`` when
    one is given. Each frame goes through its own source-to-view transform,
    and a frame whose transform is the identity keeps its coordinates bit for
    bit.
    """
    selected = select_window(frames, current_index, cfg.window)
    to_view = invert(view) if view is not None else None

    points: list[np.ndarray] = []
    intensities: list[np.ndarray] = []
    dynamic: list[np.ndarray] = []
    sources: list[np.ndarray] = []

    for frame_id in selected:
        frame = frames[frame_id]
        if frame_id == current_index and cfg.include_dynamic_from_current:
            keep = np.ones(len(frame), dtype=bool)
        else:
            keep = frame.static_mask

        relative = frame.pose if to_view is None else compose(to_view, frame.pose)
        points.append(move_points(frame.points[keep], relative))
        intensities.append(frame.intensities[keep])
        dynamic.append(frame.dynamic_flags[keep])
        sources.append(np.full(int(keep.sum()), frame_id, dtype=np.int64))

    fused = FusedCloud(
        points=np.concatenate(points).reshape(-1, 3),
        intensities=np.concatenate(intensities),
        dynamic_flags=np.concatenate(dynamic),
        source_frame_ids=np.concatenate(sources),
    )
    logger.debug("Fused %d points from frames %s.", len(fused), selected)
    return fused


def move_points(points: Any, transform: Pose) -> np.ndarray:
    """``transform.apply(points)``, except that an identity transform copies the input unchanged."""
    if transform.allclose(_IDENTITY):
        return np.array(points, dtype=np.float64).reshape(-1, 3)
    return transform.apply(points)


def transform_to_view(world_points: Any, target: Pose) -> np.ndarray:
    return invert(target).apply(world_points)


def shift_pose(base: Pose, delta: float) -> Pose:
    """Lateral shift along the sensor +y axis."""
    return compose(base, Pose.from_translation([0.0, float(delta), 0.0]))


def sample_shift_direction(rng: np.random.Generator) -> int:
    return LEFT if rng.random() < 0.5 else RIGHT
