from __future__ import annotations

import numpy as np
import pytest

from lidar_evs.models import SensorModel


def make_sensor(height: int = 8, width: int = 64, elevation_deg: tuple[float, float] = (-20.0, 20.0), max_range: float = 100.0) -> SensorModel:
    return SensorModel.from_dict(
        {
            "height": height,
            "width": width,
            "azimuth_fov_deg": [-180.0, 180.0],
            "elevation_fov_deg": list(elevation_deg),
            "max_range_m": max_range,
        }
    )


@pytest.fixture
def small_sensor() -> SensorModel:
    return make_sensor()


@pytest.fixture
def default_sensor() -> SensorModel:
    return SensorModel.default()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(7)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
