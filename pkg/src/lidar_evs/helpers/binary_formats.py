"""Little-endian LEVP / LEVR / LEVG readers and writers.

LEVP  magic 'LEVP', u32 version, f64x16 row-major pose, i64 timestamp,
      u64 count, then per point f32 x, y, z, intensity, u8 dynamic, 3 pad bytes.
LEVR  magic 'LEVR', u32 version, u32 h, u32 w, h*w f32 ranges,
      h*w f32 intensities, h*w u8 occupancy.
LEVG  magic 'LEVG', u32 version, u64 count, then per Gaussian f32x3 mean,
      f32x3 scale, f32x4 quaternion (w, x, y, z), f32 opacity, f32 feature.
Dropout masks are a bare u8 per Gaussian (bit 0 in ROI, bit 1 dropped) with a
JSON header next to them.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import InputFormatError, LidarEvsError
from ..geom import Pose
from ..models import DropoutMask, GaussianSet, LidarFrame, PseudoScan, RangeMap, RoiSpec

VERSION = 1

LEVP_MAGIC = b"LEVP"
LEVR_MAGIC = b"LEVR"
LEVG_MAGIC = b"LEVG"

_LEVP_HEADER = struct.Struct("<4sI16dqQ")
_LEVR_HEADER = struct.Struct("<4sIII")
_LEVG_HEADER = struct.Struct("<4sIQ")

_POINT_DTYPE = np.dtype(
    [("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("intensity", "<f4"), ("dynamic", "u1"), ("pad", "V3")]
)
_GAUSSIAN_DTYPE = np.dtype(
    [("mean", "<f4", (3,)), ("scale", "<f4", (3,)), ("quat", "<f4", (4,)), ("opacity", "<f4"), ("feature", "<f4")]
)

_MASK_ROI = 1
_MASK_DROP = 2


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def _read(path: Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise InputFormatError(path, 0, f"cannot read file: {exc.strerror or exc}") from exc


def _check_magic(path: Path, data: bytes, magic: bytes) -> None:
    if data[:4] != magic:
        raise InputFormatError(path, 0, f"bad magic {data[:4]!r}, expected {magic!r}")


def _check_header(path: Path, data: bytes, header: struct.Struct, magic: bytes) -> tuple[Any, ...]:
    _check_magic(path, data, magic)
    if len(data) < header.size:
        raise InputFormatError(path, len(data), f"truncated header, need {header.size} bytes")
    fields = header.unpack_from(data, 0)
    if fields[1] != VERSION:
        raise InputFormatError(path, 4, f"unsupported version {fields[1]}")
    return fields


def _check_length(path: Path, data: bytes, expected: int) -> None:
    if len(data) < expected:
        raise InputFormatError(path, len(data), f"truncated payload, expected {expected} bytes")
    if len(data) > expected:
        raise InputFormatError(path, expected, f"{len(data) - expected} trailing bytes")


def _records(data: bytes, dtype: Any, count: int, offset: int) -> np.ndarray:
    if count == 0:
        return np.zeros(0, dtype=dtype)
    return np.frombuffer(data, dtype=dtype, count=count, offset=offset)


def detect_kind(path: Path) -> str:
    data = _read(path)[:4]
    for magic in (LEVP_MAGIC, LEVR_MAGIC, LEVG_MAGIC):
        if data == magic:
            return magic.decode("ascii")
    raise InputFormatError(path, 0, f"unknown magic {data!r}")


def _encode_levp(pose: Pose, timestamp: int, points: np.ndarray, intensities: np.ndarray, dynamic: np.ndarray) -> bytes:
    records = np.zeros(len(points), dtype=_POINT_DTYPE)
    records["x"] = points[:, 0]
    records["y"] = points[:, 1]
    records["z"] = points[:, 2]
    records["intensity"] = intensities
    records["dynamic"] = dynamic.astype(np.uint8)
    header = _LEVP_HEADER.pack(LEVP_MAGIC, VERSION, *pose.matrix.reshape(-1).tolist(), int(timestamp), len(points))
    return header + records.tobytes()


def write_frame(path: Path, frame: LidarFrame) -> None:
    path = Path(path)
    _ensure_parent(path)
    path.write_bytes(_encode_levp(frame.pose, frame.timestamp, frame.points, frame.intensities, frame.dynamic_flags))


def write_pseudo_scan(path: Path, scan: PseudoScan) -> None:
    path = Path(path)
    _ensure_parent(path)
    dynamic = np.zeros(len(scan), dtype=bool)
    path.write_bytes(_encode_levp(scan.pose, scan.timestamp, scan.points, scan.intensities, dynamic))


def read_frame(path: Path) -> LidarFrame:
    path = Path(path)
    data = _read(path)
    fields = _check_header(path, data, _LEVP_HEADER, LEVP_MAGIC)
    timestamp, count = fields[18], fields[19]
    _check_length(path, data, _LEVP_HEADER.size + count * _POINT_DTYPE.itemsize)

    try:
        pose = Pose(np.array(fields[2:18], dtype=np.float64).reshape(4, 4))
    except LidarEvsError as exc:
        raise InputFormatError(path, 8, f"invalid pose: {exc}") from exc

    records = _records(data, _POINT_DTYPE, count, _LEVP_HEADER.size)
    dynamic = records["dynamic"]
    if np.any(dynamic > 1):
        bad = int(np.flatnonzero(dynamic > 1)[0])
        raise InputFormatError(path, _LEVP_HEADER.size + bad * _POINT_DTYPE.itemsize + 16, "dynamic flag not 0/1")
    try:
        return LidarFrame(
            points=np.column_stack([records["x"], records["y"], records["z"]]),
            intensities=records["intensity"],
            dynamic_flags=dynamic.astype(bool),
            pose=pose,
            timestamp=int(timestamp),
        )
    except LidarEvsError as exc:
        raise InputFormatError(path, _LEVP_HEADER.size, str(exc)) from exc


def write_range_map(path: Path, rm: RangeMap) -> None:
    path = Path(path)
    _ensure_parent(path)
    payload = b"".join(
        [
            _LEVR_HEADER.pack(LEVR_MAGIC, VERSION, rm.height, rm.width),
            rm.range.astype("<f4").tobytes(),
            rm.intensity.astype("<f4").tobytes(),
            rm.occupancy.astype(np.uint8).tobytes(),
        ]
    )
    path.write_bytes(payload)


def read_range_map(path: Path) -> RangeMap:
    path = Path(path)
    data = _read(path)
    _, _, height, width = _check_header(path, data, _LEVR_HEADER, LEVR_MAGIC)
    cells = height * width
    _check_length(path, data, _LEVR_HEADER.size + cells * 9)

    offset = _LEVR_HEADER.size
    rng = _records(data, np.dtype("<f4"), cells, offset)
    intensity = _records(data, np.dtype("<f4"), cells, offset + 4 * cells)
    occupancy = _records(data, np.dtype(np.uint8), cells, offset + 8 * cells)
    if np.any(occupancy > 1):
        bad = int(np.flatnonzero(occupancy > 1)[0])
        raise InputFormatError(path, offset + 8 * cells + bad, "occupancy byte not 0/1")
    try:
        return RangeMap(height, width, rng, intensity, occupancy.astype(bool))
    except LidarEvsError as exc:
        raise InputFormatError(path, offset, str(exc)) from exc


def write_gaussians(path: Path, g: GaussianSet) -> None:
    path = Path(path)
    _ensure_parent(path)
    records = np.zeros(len(g), dtype=_GAUSSIAN_DTYPE)
    records["mean"] = g.means
    records["scale"] = g.scales
    records["quat"] = g.rotations
    records["opacity"] = g.opacities
    records["feature"] = g.features
    path.write_bytes(_LEVG_HEADER.pack(LEVG_MAGIC, VERSION, len(g)) + records.tobytes())


def read_gaussians(path: Path) -> GaussianSet:
    path = Path(path)
    data = _read(path)
    _, _, count = _check_header(path, data, _LEVG_HEADER, LEVG_MAGIC)
    _check_length(path, data, _LEVG_HEADER.size + count * _GAUSSIAN_DTYPE.itemsize)
    records = _records(data, _GAUSSIAN_DTYPE, count, _LEVG_HEADER.size)
    try:
        return GaussianSet(
            means=records["mean"],
            scales=records["scale"],
            rotations=records["quat"],
            opacities=records["opacity"],
            features=records["feature"],
        )
    except LidarEvsError as exc:
        raise InputFormatError(path, _LEVG_HEADER.size, str(exc)) from exc


def write_dropout_mask(stem: Path, mask: DropoutMask, spec: RoiSpec) -> tuple[Path, Path]:
    stem = Path(stem)
    _ensure_parent(stem)
    bits = mask.roi.astype(np.uint8) * _MASK_ROI | mask.drop.astype(np.uint8) * _MASK_DROP
    mask_path = stem.with_suffix(".levm")
    header_path = stem.with_suffix(".json")
    mask_path.write_bytes(bits.astype(np.uint8).tobytes())
    header = {
        "format": "levm",
        "version": VERSION,
        "count": len(mask),
        "seed": mask.seed,
        "drop_rate": spec.drop_rate,
        "roi": spec.to_dict(),
        "dropped": int(mask.drop.sum()),
        "in_roi": int(mask.roi.sum()),
    }
    header_path.write_text(json.dumps(header, indent=2, sort_keys=True), encoding="utf-8")
    return mask_path, header_path


def read_dropout_mask(stem: Path) -> tuple[DropoutMask, RoiSpec]:
    stem = Path(stem)
    mask_path = stem.with_suffix(".levm")
    header_path = stem.with_suffix(".json")
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InputFormatError(header_path, 0, f"unreadable mask header: {exc}") from exc
    bits = np.frombuffer(_read(mask_path), dtype=np.uint8)
    if len(bits) != int(header["count"]):
        raise InputFormatError(mask_path, len(bits), f"expected {header['count']} mask bytes")
    if np.any(bits > (_MASK_ROI | _MASK_DROP)):
        raise InputFormatError(mask_path, int(np.flatnonzero(bits > 3)[0]), "unknown mask bits")
    try:
        mask = DropoutMask(roi=(bits & _MASK_ROI) > 0, drop=(bits & _MASK_DROP) > 0, seed=int(header["seed"]))
    except LidarEvsError as exc:
        raise InputFormatError(mask_path, 0, str(exc)) from exc
    return mask, RoiSpec.from_dict(header["roi"])


def write_ascii_cloud(path: Path, points: np.ndarray, intensities: np.ndarray) -> None:
    """Plain ``x y z intensity`` lines for point-cloud viewers."""
    path = Path(path)
    _ensure_parent(path)
    table = np.column_stack([np.asarray(points).reshape(-1, 3), np.asarray(intensities).reshape(-1)])
    np.savetxt(path, table, fmt="%.6f", delimiter=" ")
