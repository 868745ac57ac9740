"""Pseudo-LiDAR curation, Gaussian range-map rendering and LiDAR metrics for extrapolated views."""

__all__ = ["main"]
