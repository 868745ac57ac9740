from __future__ import annotations

from pathlib import Path


class LidarEvsError(Exception):
    exit_code = 1


class InputFormatError(LidarEvsError):
    exit_code = 2

    def __init__(self, path: Path | str, offset: int, message: str) -> None:
        self.path = Path(path)
        self.offset = offset
        super().__init__(f"{self.path}: byte {offset}: {message}")


class ConfigValidationError(LidarEvsError, ValueError):
    exit_code = 3


class AllGaussiansDegenerate(LidarEvsError):
    exit_code = 4


class DimensionMismatch(LidarEvsError, ValueError):
    exit_code = 5


class UploadError(LidarEvsError):
    exit_code = 6


class InvalidPose(LidarEvsError, ValueError):
    pass


class ZeroRange(LidarEvsError, ValueError):
    pass


class PoleDegenerate(LidarEvsError, ValueError):
    pass


class EmptyWindow(LidarEvsError, ValueError):
    pass


class NeighborhoodTooSmall(LidarEvsError, ValueError):
    pass


class LengthMismatch(LidarEvsError, ValueError):
    pass


class NoOverlap(LidarEvsError, ValueError):
    pass


class EmptyCloud(LidarEvsError, ValueError):
    pass
