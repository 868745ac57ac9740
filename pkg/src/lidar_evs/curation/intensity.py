from __future__ import annotations

from typing import Any

import numpy as np

GRAZING_COSINE = 1e-3


def _normalize(rays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(rays, axis=1)
    nonzero = norms > 0.0
    return rays / np.where(nonzero, norms, 1.0)[:, None], nonzero


def adjust_intensity(
    i_ori: Any,
    n: Any,
    ray_ori: Any,
    ray_extra: Any,
) -> tuple[np.ndarray, np.ndarray]:
    """Incidence-normalized intensity for a new viewpoint.

    ``I_extra = clamp(I_ori * (n . r_extra) / (n . r_ori), 0, 1)`` with both
    rays normalized. The distance term is left out. Where the original view
    is grazing (|n . r_ori| < GRAZING_COSINE) the input intensity passes
    through unchanged; those entries are flagged in the second return value.
    """
    intensity = np.atleast_1d(np.asarray(i_ori, dtype=np.float64))
    normals = np.asarray(n, dtype=np.float64).reshape(-1, 3)
    r_ori, ori_ok = _normalize(np.asarray(ray_ori, dtype=np.float64).reshape(-1, 3))
    r_extra, extra_ok = _normalize(np.asarray(ray_extra, dtype=np.float64).reshape(-1, 3))

    cos_ori = np.einsum("ni,ni->n", normals, r_ori)
    cos_extra = np.einsum("ni,ni->n", normals, r_extra)

    passthrough = (np.abs(cos_ori) < GRAZING_COSINE) | ~ori_ok | ~extra_ok
    ratio = cos_extra / np.where(passthrough, 1.0, cos_ori)
    adjusted = np.clip(intensity * ratio, 0.0, 1.0)
    return np.where(passthrough, intensity, adjusted), passthrough
