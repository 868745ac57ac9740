"""Rigid-body and spherical-coordinate math.

Poses are world-from-sensor: a sensor-frame point maps to the world frame as
``p_w = T @ p_s``. Angles are radians; azimuth lives in (-pi, pi] and
``atan2(0, 0)`` is taken as 0 so the poles have a canonical azimuth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvalidPose, PoleDegenerate, ZeroRange

POSE_TOLERANCE = 1e-9
ZERO_RANGE = 1e-12
POLE_RHO = 1e-9


@dataclass(frozen=True, eq=False)
class Pose:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise InvalidPose(f"pose matrix must be 4x4, got {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidPose("pose matrix has non-finite entries")
        if not np.allclose(matrix[3], [0.0, 0.0, 0.0, 1.0], rtol=0.0, atol=POSE_TOLERANCE):
            raise InvalidPose(f"pose last row must be [0, 0, 0, 1], got {matrix[3].tolist()}")
        rotation = matrix[:3, :3]
        if not np.allclose(rotation @ rotation.T, np.eye(3), rtol=0.0, atol=POSE_TOLERANCE):
            raise InvalidPose("pose rotation block is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > POSE_TOLERANCE:
            raise InvalidPose("pose rotation block is not a proper rotation (det != +1)")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def identity(cls) -> Pose:
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(cls, rotation: Any, translation: Any) -> Pose:
        matrix = np.eye(4)
        matrix[:3, :3] = np.asarray(rotation, dtype=np.float64)
        matrix[:3, 3] = np.asarray(translation, dtype=np.float64)
        return cls(matrix)

    @classmethod
    def from_translation(cls, translation: Any) -> Pose:
        return cls.from_rotation_translation(np.eye(3), translation)

    @classmethod
    def from_quaternion(cls, quaternion: Any, translation: Any = (0.0, 0.0, 0.0)) -> Pose:
        return cls.from_rotation_translation(quaternion_to_rotation(quaternion), translation)

    @classmethod
    def from_yaw(cls, yaw: float, translation: Any = (0.0, 0.0, 0.0)) -> Pose:
        c, s = math.cos(yaw), math.sin(yaw)
        rotation = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return cls.from_rotation_translation(rotation, translation)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Pose:
        if "matrix" in data:
            return cls(np.asarray(data["matrix"], dtype=np.float64))
        translation = data.get("translation", (0.0, 0.0, 0.0))
        if "quaternion" in data:
            return cls.from_quaternion(data["quaternion"], translation)
        return cls.from_yaw(math.radians(float(data.get("yaw_deg", 0.0))), translation)

    def to_dict(self) -> dict[str, Any]:
        return {"matrix": self.matrix.tolist()}

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def apply(self, points: Any) -> np.ndarray:
        """Map (N, 3) points through the transform."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return pts @ self.rotation.T + self.translation

    def allclose(self, other: Pose, atol: float = POSE_TOLERANCE) -> bool:
        return bool(np.allclose(self.matrix, other.matrix, rtol=0.0, atol=atol))

    def __repr__(self) -> str:
        return f"Pose(translation={self.translation.tolist()})"


@dataclass(frozen=True)
class SphericalPoint:
    azimuth: float
    elevation: float
    range: float


def compose(a: Pose, b: Pose) -> Pose:
    return Pose(a.matrix @ b.matrix)


def invert(p: Pose) -> Pose:
    rotation_t = p.rotation.T
    return Pose.from_rotation_translation(rotation_t, -rotation_t @ p.translation)


def quaternion_to_rotation(quaternion: Any) -> np.ndarray:
    """Rotation matrix for a (w, x, y, z) quaternion; batched inputs give (N, 3, 3)."""
    q = np.asarray(quaternion, dtype=np.float64)
    single = q.ndim == 1
    q = q.reshape(-1, 4)
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    rotation = np.empty((q.shape[0], 3, 3))
    rotation[:, 0, 0] = 1 - 2 * (y * y + z * z)
    rotation[:, 0, 1] = 2 * (x * y - w * z)
    rotation[:, 0, 2] = 2 * (x * z + w * y)
    rotation[:, 1, 0] = 2 * (x * y + w * z)
    rotation[:, 1, 1] = 1 - 2 * (x * x + z * z)
    rotation[:, 1, 2] = 2 * (y * z - w * x)
    rotation[:, 2, 0] = 2 * (x * z - w * y)
    rotation[:, 2, 1] = 2 * (y * z + w * x)
    rotation[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return rotation[0] if single else rotation


def _canonical_azimuth(azimuth: np.ndarray) -> np.ndarray:
    return np.where(azimuth <= -np.pi, azimuth + 2.0 * np.pi, azimuth)


def cartesian_to_spherical(points: Any) -> np.ndarray:
    """(N, 3) cartesian -> (N, 3) columns azimuth, elevation, range.

    Rows with range below ZERO_RANGE map to (0, 0, 0).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rng = np.sqrt(x * x + y * y + z * z)
    valid = rng >= ZERO_RANGE
    safe = np.where(valid, rng, 1.0)
    azimuth = _canonical_azimuth(np.arctan2(y, x))
    elevation = np.arcsin(np.clip(z / safe, -1.0, 1.0))
    out = np.column_stack([azimuth, elevation, rng])
    out[~valid] = 0.0
    return out


def spherical_to_cartesian(spherical: Any) -> np.ndarray:
    sph = np.asarray(spherical, dtype=np.float64).reshape(-1, 3)
    azimuth, elevation, rng = sph[:, 0], sph[:, 1], sph[:, 2]
    cos_el = np.cos(elevation)
    return np.column_stack(
        [rng * cos_el * np.cos(azimuth), rng * cos_el * np.sin(azimuth), rng * np.sin(elevation)]
    )


def to_spherical(p: Any) -> SphericalPoint:
    point = np.asarray(p, dtype=np.float64).reshape(3)
    if float(np.linalg.norm(point)) < ZERO_RANGE:
        raise ZeroRange(f"spherical direction undefined for {point.tolist()}")
    azimuth, elevation, rng = cartesian_to_spherical(point)[0]
    return SphericalPoint(float(azimuth), float(elevation), float(rng))


def from_spherical(s: SphericalPoint) -> np.ndarray:
    return spherical_to_cartesian([s.azimuth, s.elevation, s.range])[0]


def spherical_jacobians(points: Any) -> np.ndarray:
    """Gradients of (azimuth, elevation, range) w.r.t. (x, y, z), shape (N, 3, 3).

    Callers must exclude points with rho <= POLE_RHO.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    rho2 = x * x + y * y
    rho = np.sqrt(rho2)
    r2 = rho2 + z * z
    r = np.sqrt(r2)
    jac = np.zeros((pts.shape[0], 3, 3))
    jac[:, 0, 0] = -y / rho2
    jac[:, 0, 1] = x / rho2
    jac[:, 1, 0] = -x * z / (r2 * rho)
    jac[:, 1, 1] = -y * z / (r2 * rho)
    jac[:, 1, 2] = rho / r2
    jac[:, 2, 0] = x / r
    jac[:, 2, 1] = y / r
    jac[:, 2, 2] = z / r
    return jac


def spherical_jacobian(p: Any) -> np.ndarray:
    point = np.asarray(p, dtype=np.float64).reshape(3)
    if math.hypot(point[0], point[1]) <= POLE_RHO:
        raise PoleDegenerate(f"jacobian undefined at elevation pole {point.tolist()}")
    return spherical_jacobians(point)[0]
