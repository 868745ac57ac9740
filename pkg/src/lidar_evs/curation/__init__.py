from .fusion import LEFT, RIGHT, fuse, move_points, sample_shift_direction, select_window, shift_pose, transform_to_view
from .intensity import adjust_intensity
from .normals import NormalEstimate, estimate_normals, sensor_facing_normals
from .pipeline import CurationOptions, curate
from .raycast import curled_indices, occlusion_curl, raycast

__all__ = [
    "LEFT",
    "RIGHT",
    "CurationOptions",
    "NormalEstimate",
    "adjust_intensity",
    "curate",
    "curled_indices",
    "estimate_normals",
    "fuse",
    "move_points",
    "occlusion_curl",
    "raycast",
    "sample_shift_direction",
    "select_window",
    "sensor_facing_normals",
    "shift_pose",
    "transform_to_view",
]
