from __future__ import annotations

import logging
from pathlib import Path

from ..errors import ConfigValidationError
from ..helpers.binary_formats import read_frame
from ..models import LidarFrame

logger = logging.getLogger(__name__)


class FrameCollector:
    """Loads the LEVP frames of a directory in file-name order."""

    def __init__(self, frames_dir: Path) -> None:
        self.frames_dir = Path(frames_dir)

    def list_frame_paths(self) -> list[Path]:
        if not self.frames_dir.is_dir():
            raise ConfigValidationError(f"frame directory not found: {self.frames_dir}")
        return sorted(path for path in self.frames_dir.iterdir() if path.suffix.lower() == ".levp")

    def load_frames(self) -> list[LidarFrame]:
        paths = self.list_frame_paths()
        frames: list[LidarFrame] = []
        for index, path in enumerate(paths, start=1):
            logger.debug("[%d/%d] Reading frame %s", index, len(paths), path.name)
            frames.append(read_frame(path))
        logger.info("Loaded %d frames (%d points) from %s.", len(frames), sum(len(f) for f in frames), self.frames_dir)
        return frames
