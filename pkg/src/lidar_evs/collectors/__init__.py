from .frame_collector import FrameCollector

__all__ = ["FrameCollector"]
