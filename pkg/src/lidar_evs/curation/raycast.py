from __future__ import annotations

from typing import Any

import numpy as np

from ..models import PseudoScan, SensorModel
from ..sensor import nearest_hits


def raycast(points: Any, m: SensorModel) -> np.ndarray:
    """True for the nearest in-FoV, in-range hit of each occupied cell."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    mask = np.zeros(len(pts), dtype=bool)
    mask[nearest_hits(pts, m).indices] = True
    return mask


def curled_indices(points: Any, m: SensorModel) -> np.ndarray:
    """Indices surviving occlusion curling, in input order."""
    return np.flatnonzero(raycast(points, m))


def occlusion_curl(scan: PseudoScan, m: SensorModel) -> PseudoScan:
    return scan.select(curled_indices(scan.points, m))
