from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from .errors import ConfigValidationError, InvalidPose
from .geom import Pose
from .models import FusionConfig, RoiSpec, SensorModel


def _to_bool(value: str | None, default: bool) -> bool:
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "y", "on"}


def _to_int(value: str | None, default: int) -> int:
    if value is None or value.strip() == "":
        return default
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigValidationError(f"expected an integer, got {value!r}") from exc


def _read_json(path: Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigValidationError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except ValueError as exc:
        raise ConfigValidationError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigValidationError(f"{path} must hold a JSON object")
    return data


def _from_file(base_dir: Path, value: str | None) -> Path | None:
    return base_dir / value if value else None


def load_sensor(path: Path) -> SensorModel:
    return SensorModel.from_dict(_read_json(path))


def load_pose(path: Path | None) -> Pose:
    """Pose JSON document; no path means the identity pose."""
    if path is None:
        return Pose.identity()
    data = _read_json(path)
    try:
        return Pose.from_dict(data)
    except (InvalidPose, KeyError, TypeError, ValueError) as exc:
        raise ConfigValidationError(f"invalid pose in {path}: {exc}") from exc


@dataclass(frozen=True)
class PublishConfig:
    oci_config_file: str
    oci_config_profile: str
    oci_region: str | None
    object_storage_namespace: str | None
    object_storage_bucket: str | None
    object_storage_prefix: str
    fail_on_upload_error: bool

    @classmethod
    def from_env(cls) -> PublishConfig:
        config_file_default = str(Path.home() / ".oci" / "config")
        return cls(
            oci_config_file=os.getenv("OCI_CONFIG_FILE", "").strip() or config_file_default,
            oci_config_profile=os.getenv("OCI_CONFIG_PROFILE", "").strip() or "DEFAULT",
            oci_region=os.getenv("OCI_REGION", "").strip() or None,
            object_storage_namespace=os.getenv("LIDAR_EVS_OBJECT_STORAGE_NAMESPACE", "").strip() or None,
            object_storage_bucket=os.getenv("LIDAR_EVS_OBJECT_STORAGE_BUCKET", "").strip() or None,
            object_storage_prefix=os.getenv("LIDAR_EVS_OBJECT_STORAGE_PREFIX", "lidar-evs").strip("/"),
            fail_on_upload_error=_to_bool(os.getenv("LIDAR_EVS_FAIL_ON_UPLOAD_ERROR"), True),
        )


@dataclass(frozen=True)
class CurationSettings:
    normal_k: int = 16
    adjust_intensity: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    sensor: SensorModel
    fusion: FusionConfig
    curation: CurationSettings
    delta_m: float
    seed: int
    dropout: RoiSpec
    threads: int
    frames_dir: Path | None
    output_dir: Path
    gaussians_path: Path | None
    publish: PublishConfig = field(default_factory=PublishConfig.from_env)

    def __post_init__(self) -> None:
        if self.delta_m < 0:
            raise ConfigValidationError(f"delta_m must be >= 0, got {self.delta_m}")
        if self.threads < 1:
            raise ConfigValidationError(f"threads must be >= 1, got {self.threads}")
        if self.curation.normal_k < 3:
            raise ConfigValidationError(f"normal_k must be >= 3, got {self.curation.normal_k}")
        if not 0 <= self.seed < 2**64:
            raise ConfigValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed}")

    @classmethod
    def load(cls, config_path: Path | None = None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
        """Non-None ``overrides`` (CLI flags), then file values, then environment defaults.

        Relative paths in the file resolve against the file's directory.
        """
        load_dotenv(override=False)
        data = _read_json(config_path) if config_path else {}
        overrides = {key: value for key, value in (overrides or {}).items() if value is not None}
        base_dir = Path(config_path).parent if config_path else Path.cwd()

        try:
            sensor_path = overrides.get("sensor_path")
            if sensor_path is not None:
                sensor = load_sensor(Path(sensor_path))
            elif isinstance(data.get("sensor"), str):
                sensor = load_sensor(base_dir / data["sensor"])
            elif isinstance(data.get("sensor"), dict):
                sensor = SensorModel.from_dict(data["sensor"])
            else:
                sensor = SensorModel.default()

            fusion_data = data.get("fusion", {})
            fusion = FusionConfig(
                window=int(overrides.get("window", fusion_data.get("window", 10))),
                include_dynamic_from_current=bool(fusion_data.get("include_dynamic_from_current", True)),
            )

            curation_data = data.get("curation", {})
            curation = CurationSettings(
                normal_k=int(overrides.get("normal_k", curation_data.get("normal_k", 16))),
                adjust_intensity=bool(overrides.get("adjust_intensity", curation_data.get("adjust_intensity", True))),
            )

            dropout_data = data.get("dropout", {})
            dropout = RoiSpec(
                d_max=float(dropout_data.get("d_max_m", sensor.max_range)),
                elevation_min=math.radians(
                    float(dropout_data.get("elevation_min_deg", math.degrees(sensor.elevation_fov[0])))
                ),
                elevation_max=math.radians(
                    float(dropout_data.get("elevation_max_deg", math.degrees(sensor.elevation_fov[1])))
                ),
                drop_rate=float(overrides.get("drop_rate", dropout_data.get("drop_rate", 0.5))),
            )

            paths = data.get("paths", {})
            threads_default = int(data["threads"]) if "threads" in data else _to_int(os.getenv("LIDAR_EVS_THREADS"), 1)
            if paths.get("output_dir"):
                output_default = base_dir / paths["output_dir"]
            else:
                output_default = Path(os.getenv("LIDAR_EVS_OUTPUT_DIR", "").strip() or "output")
            frames_dir = overrides.get("frames_dir") or _from_file(base_dir, paths.get("frames_dir"))
            gaussians = overrides.get("gaussians_path") or _from_file(base_dir, paths.get("gaussians"))

            return cls(
                sensor=sensor,
                fusion=fusion,
                curation=curation,
                delta_m=float(overrides.get("delta_m", data.get("delta_m", 4.0))),
                seed=int(overrides.get("seed", data.get("seed", 0))),
                dropout=dropout,
                threads=int(overrides.get("threads", threads_default)),
                frames_dir=Path(frames_dir) if frames_dir else None,
                output_dir=Path(overrides.get("output_dir", output_default)),
                gaussians_path=Path(gaussians) if gaussians else None,
            )
        except ConfigValidationError:
            raise
        except (TypeError, ValueError, AttributeError) as exc:
            raise ConfigValidationError(f"invalid configuration: {exc}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            "sensor": self.sensor.to_dict(),
            "fusion": {
                "window": self.fusion.window,
                "include_dynamic_from_current": self.fusion.include_dynamic_from_current,
            },
            "curation": {
                "normal_k": self.curation.normal_k,
                "adjust_intensity": self.curation.adjust_intensity,
            },
            "delta_m": self.delta_m,
            "seed": self.seed,
            "dropout": self.dropout.to_dict(),
        }
