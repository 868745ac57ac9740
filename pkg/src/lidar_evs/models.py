from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigValidationError, LengthMismatch
from .geom import Pose

EMPTY_RANGE = -1.0


def _as_array(value: Any, dtype: Any, shape_tail: tuple[int, ...] = ()) -> np.ndarray:
    array = np.asarray(value, dtype=dtype)
    if shape_tail:
        array = array.reshape((-1, *shape_tail))
    else:
        array = array.reshape(-1)
    return array


@dataclass(frozen=True)
class SensorModel:
    height: int
    width: int
    azimuth_fov: tuple[float, float]
    elevation_fov: tuple[float, float]
    max_range: float

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise ConfigValidationError(f"sensor resolution must be >= 1x1, got {self.height}x{self.width}")
        if not self.azimuth_fov[0] < self.azimuth_fov[1]:
            raise ConfigValidationError(f"azimuth fov min must be < max, got {self.azimuth_fov}")
        if not self.elevation_fov[0] < self.elevation_fov[1]:
            raise ConfigValidationError(f"elevation fov min must be < max, got {self.elevation_fov}")
        if not self.max_range > 0:
            raise ConfigValidationError(f"max range must be > 0, got {self.max_range}")

    @classmethod
    def default(cls) -> SensorModel:
        return cls.from_dict(
            {
                "height": 32,
                "width": 1088,
                "azimuth_fov_deg": [-180.0, 180.0],
                "elevation_fov_deg": [-30.67, 10.67],
                "max_range_m": 200.0,
            }
        )

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SensorModel:
        try:
            az = [math.radians(float(v)) for v in data["azimuth_fov_deg"]]
            el = [math.radians(float(v)) for v in data["elevation_fov_deg"]]
            return cls(
                height=int(data["height"]),
                width=int(data["width"]),
                azimuth_fov=(az[0], az[1]),
                elevation_fov=(el[0], el[1]),
                max_range=float(data["max_range_m"]),
            )
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            if isinstance(exc, ConfigValidationError):
                raise
            raise ConfigValidationError(f"invalid sensor document: {exc!r}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "height": self.height,
            "width": self.width,
            "azimuth_fov_deg": [math.degrees(v) for v in self.azimuth_fov],
            "elevation_fov_deg": [math.degrees(v) for v in self.elevation_fov],
            "max_range_m": self.max_range,
        }

    def with_resolution(self, height: int, width: int) -> SensorModel:
        return SensorModel(height, width, self.azimuth_fov, self.elevation_fov, self.max_range)

    @property
    def azimuth_span(self) -> float:
        return self.azimuth_fov[1] - self.azimuth_fov[0]

    @property
    def elevation_span(self) -> float:
        return self.elevation_fov[1] - self.elevation_fov[0]

    @property
    def is_full_circle(self) -> bool:
        return self.azimuth_span >= 2.0 * math.pi - 1e-9

    @property
    def cell_count(self) -> int:
        return self.height * self.width


@dataclass(frozen=True, eq=False)
class LidarFrame:
    points: np.ndarray
    intensities: np.ndarray
    dynamic_flags: np.ndarray
    pose: Pose
    timestamp: int

    def __post_init__(self) -> None:
        points = _as_array(self.points, np.float64, (3,))
        intensities = _as_array(self.intensities, np.float64)
        dynamic = _as_array(self.dynamic_flags, bool)
        if not (len(points) == len(intensities) == len(dynamic)):
            raise LengthMismatch(
                f"frame arrays differ in length: points={len(points)} "
                f"intensities={len(intensities)} dynamic={len(dynamic)}"
            )
        if len(intensities) and (intensities.min() < 0.0 or intensities.max() > 1.0):
            raise ConfigValidationError("frame intensities must lie in [0, 1]")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "intensities", intensities)
        object.__setattr__(self, "dynamic_flags", dynamic)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def static_mask(self) -> np.ndarray:
        return ~self.dynamic_flags


@dataclass(frozen=True, eq=False)
class RangeMap:
    height: int
    width: int
    range: np.ndarray
    intensity: np.ndarray
    occupancy: np.ndarray

    def __post_init__(self) -> None:
        shape = (self.height, self.width)
        rng = np.asarray(self.range, dtype=np.float32).reshape(shape)
        intensity = np.asarray(self.intensity, dtype=np.float32).reshape(shape)
        occupancy = np.asarray(self.occupancy, dtype=bool).reshape(shape)
        if not np.array_equal(~occupancy, rng == EMPTY_RANGE):
            raise ConfigValidationError("range map occupancy disagrees with the empty-range sentinel")
        object.__setattr__(self, "range", rng)
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "occupancy", occupancy)

    @classmethod
    def empty(cls, height: int, width: int) -> RangeMap:
        return cls(
            height,
            width,
            np.full((height, width), EMPTY_RANGE, dtype=np.float32),
            np.zeros((height, width), dtype=np.float32),
            np.zeros((height, width), dtype=bool),
        )

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    def same_as(self, other: RangeMap) -> bool:
        return (
            self.height == other.height
            and self.width == other.width
            and np.array_equal(self.range, other.range)
            and np.array_equal(self.intensity, other.intensity)
            and np.array_equal(self.occupancy, other.occupancy)
        )


@dataclass(frozen=True, eq=False)
class GaussianSet:
    means: np.ndarray
    scales: np.ndarray
    rotations: np.ndarray
    opacities: np.ndarray
    features: np.ndarray

    def __post_init__(self) -> None:
        means = _as_array(self.means, np.float64, (3,))
        scales = _as_array(self.scales, np.float64, (3,))
        rotations = _as_array(self.rotations, np.float64, (4,))
        opacities = _as_array(self.opacities, np.float64)
        features = _as_array(self.features, np.float64)
        count = len(means)
        if any(len(a) != count for a in (scales, rotations, opacities, features)):
            raise LengthMismatch("gaussian attribute arrays differ in length")
        if count:
            if np.any(np.abs(np.linalg.norm(rotations, axis=1) - 1.0) > 1e-6):
                raise ConfigValidationError("gaussian quaternions must be unit length")
            if np.any(scales <= 0.0):
                raise ConfigValidationError("gaussian scales must be positive")
            if np.any((opacities <= 0.0) | (opacities >= 1.0)):
                raise ConfigValidationError("gaussian opacities must lie in (0, 1)")
        for name, value in (
            ("means", means),
            ("scales", scales),
            ("rotations", rotations),
            ("opacities", opacities),
            ("features", features),
        ):
            object.__setattr__(self, name, value)

    def __len__(self) -> int:
        return len(self.means)

    def subset(self, keep: np.ndarray) -> GaussianSet:
        return GaussianSet(
            self.means[keep], self.scales[keep], self.rotations[keep], self.opacities[keep], self.features[keep]
        )

    def with_opacities(self, opacities: np.ndarray) -> GaussianSet:
        return GaussianSet(self.means, self.scales, self.rotations, opacities, self.features)


@dataclass(frozen=True)
class FusionConfig:
    window: int = 10
    include_dynamic_from_current: bool = True

    def __post_init__(self) -> None:
        if self.window < 1:
            raise ConfigValidationError(f"fusion window must be >= 1, got {self.window}")


@dataclass(frozen=True, eq=False)
class FusedCloud:
    points: np.ndarray
    intensities: np.ndarray
    dynamic_flags: np.ndarray
    source_frame_ids: np.ndarray

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class PseudoScan:
    points: np.ndarray
    intensities: np.ndarray
    source_frame_ids: np.ndarray
    normals: np.ndarray | None = None
    pose: Pose = field(default_factory=Pose.identity)
    timestamp: int = 0
    provenance: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        points = _as_array(self.points, np.float64, (3,))
        intensities = _as_array(self.intensities, np.float64)
        sources = _as_array(self.source_frame_ids, np.int64)
        if not (len(points) == len(intensities) == len(sources)):
            raise LengthMismatch("pseudo scan arrays differ in length")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "intensities", intensities)
        object.__setattr__(self, "source_frame_ids", sources)
        if self.normals is not None:
            normals = _as_array(self.normals, np.float64, (3,))
            if len(normals) != len(points):
                raise LengthMismatch("pseudo scan normals differ in length")
            object.__setattr__(self, "normals", normals)

    def __len__(self) -> int:
        return len(self.points)

    def select(self, keep: np.ndarray) -> PseudoScan:
        return PseudoScan(
            points=self.points[keep],
            intensities=self.intensities[keep],
            source_frame_ids=self.source_frame_ids[keep],
            normals=None if self.normals is None else self.normals[keep],
            pose=self.pose,
            timestamp=self.timestamp,
            provenance=dict(self.provenance),
        )


@dataclass(frozen=True)
class RoiSpec:
    d_max: float
    elevation_min: float
    elevation_max: float
    drop_rate: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.drop_rate < 1.0:
            raise ConfigValidationError(f"drop rate must lie in [0, 1), got {self.drop_rate}")
        if not self.elevation_min < self.elevation_max:
            raise ConfigValidationError("ROI elevation min must be < max")
        if not self.d_max > 0:
            raise ConfigValidationError(f"ROI d_max must be > 0, got {self.d_max}")

    @classmethod
    def from_sensor(cls, sensor: SensorModel, drop_rate: float = 0.5) -> RoiSpec:
        return cls(sensor.max_range, sensor.elevation_fov[0], sensor.elevation_fov[1], drop_rate)

    def to_dict(self) -> dict[str, Any]:
        return {
            "d_max_m": self.d_max,
            "elevation_min_deg": math.degrees(self.elevation_min),
            "elevation_max_deg": math.degrees(self.elevation_max),
            "drop_rate": self.drop_rate,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RoiSpec:
        return cls(
            d_max=float(data["d_max_m"]),
            elevation_min=math.radians(float(data["elevation_min_deg"])),
            elevation_max=math.radians(float(data["elevation_max_deg"])),
            drop_rate=float(data.get("drop_rate", 0.5)),
        )


@dataclass(frozen=True, eq=False)
class DropoutMask:
    roi: np.ndarray
    drop: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        roi = _as_array(self.roi, bool)
        drop = _as_array(self.drop, bool)
        if len(roi) != len(drop):
            raise LengthMismatch("dropout roi and drop masks differ in length")
        if np.any(drop & ~roi):
            raise ConfigValidationError("dropout mask drops a Gaussian outside the ROI")
        object.__setattr__(self, "roi", roi)
        object.__setattr__(self, "drop", drop)

    def __len__(self) -> int:
        return len(self.roi)


@dataclass(frozen=True)
class LidarMetrics:
    depth_mse_median: float | None = None
    chamfer: float | None = None
    intensity_rmse: float | None = None
    raydrop_accuracy: float | None = None

    def to_dict(self) -> dict[str, float]:
        ordered = (
            ("depth_mse_median", self.depth_mse_median),
            ("chamfer", self.chamfer),
            ("intensity_rmse", self.intensity_rmse),
            ("raydrop_accuracy", self.raydrop_accuracy),
        )
        return {name: value for name, value in ordered if value is not None}


@dataclass(frozen=True)
class UploadResult:
    namespace: str
    bucket: str
    object_name: str
    uri: str
