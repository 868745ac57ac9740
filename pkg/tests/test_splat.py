from __future__ import annotations

import math

import numpy as np
import pytest

from lidar_evs.errors import AllGaussiansDegenerate
from lidar_evs.geom import Pose, quaternion_to_rotation, spherical_to_cartesian
from lidar_evs.models import GaussianSet
from lidar_evs.sensor import cell_centers
from lidar_evs.splat import covariance, covariances, render_range_map, to_sensor_spherical

from conftest import make_sensor

IDENTITY_QUAT = [1.0, 0.0, 0.0, 0.0]


def _set(means, sigma=1e-3, opacity=0.99, features=0.5, quats=None, scales=None) -> GaussianSet:
    means = np.asarray(means, dtype=np.float64).reshape(-1, 3)
    count = len(means)
    return GaussianSet(
        means=means,
        scales=np.full((count, 3), sigma) if scales is None else scales,
        rotations=np.tile(IDENTITY_QUAT, (count, 1)) if quats is None else quats,
        opacities=np.broadcast_to(opacity, count).astype(np.float64),
        features=np.broadcast_to(features, count).astype(np.float64),
    )


def _contributors(gaussians: GaussianSet, m) -> np.ndarray:
    """(h, w, n) mask of Gaussians whose footprint reaches each cell center, with a little slack."""
    sg = to_sensor_spherical(gaussians, Pose.identity())
    azimuth, elevation = cell_centers(m)
    d_az = np.mod(azimuth[None, :, None] - sg.means[None, None, :, 0] + np.pi, 2.0 * np.pi) - np.pi
    d_el = elevation[:, None, None] - sg.means[None, None, :, 1]
    inverse = np.linalg.inv(sg.covariances[:, :2, :2])
    maha = inverse[:, 0, 0] * d_az**2 + 2.0 * inverse[:, 0, 1] * d_az * d_el + inverse[:, 1, 1] * d_el**2
    alpha = gaussians.opacities[sg.indices] * np.exp(-0.5 * maha)
    reach = (maha <= 9.0 + 1e-6) & (alpha >= (1.0 - 1e-6) / 255.0)
    full = np.zeros((m.height, m.width, len(gaussians)), dtype=bool)
    full[:, :, sg.indices] = reach
    return full


def _quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b.T
    return np.column_stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def _unit_quats(rng: np.random.Generator, count: int) -> np.ndarray:
    q = rng.normal(size=(count, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def _on_cell(m, row: int, col: int, distance: float) -> np.ndarray:
    azimuth, elevation = cell_centers(m)
    return spherical_to_cartesian([azimuth[col], elevation[row], distance])[0]


class TestCovariance:
    def test_identity(self):
        np.testing.assert_allclose(covariance([1.0, 1.0, 1.0], IDENTITY_QUAT), np.eye(3))

    def test_axis_scale(self):
        np.testing.assert_allclose(covariance([2.0, 1.0, 1.0], IDENTITY_QUAT), np.diag([4.0, 1.0, 1.0]))

    def test_eigenvalues_are_squared_scales(self, rng):
        scales = rng.uniform(0.1, 3.0, size=(200, 3))
        sigma = covariances(scales, _unit_quats(rng, 200))
        np.testing.assert_allclose(sigma, np.swapaxes(sigma, 1, 2), atol=1e-12)
        np.testing.assert_allclose(np.linalg.eigvalsh(sigma), np.sort(scales**2, axis=1), atol=1e-9)


class TestSensorSpherical:
    def test_axis_closed_form(self):
        sigma = 0.3
        sg = to_sensor_spherical(_set([[10.0, 0.0, 0.0]], sigma=sigma), Pose.identity())
        np.testing.assert_allclose(sg.covariances[0], np.diag([sigma**2 / 100, sigma**2 / 100, sigma**2]), atol=1e-9)

    def test_point_limit(self):
        sg = to_sensor_spherical(_set([[5.0, 0.0, 0.0]], sigma=1e-9), Pose.identity())
        np.testing.assert_allclose(sg.means[0], [0.0, 0.0, 5.0], atol=1e-12)

    def test_invariant_under_shared_rotation(self, rng):
        count = 50
        means = rng.uniform(-20, 20, size=(count, 3))
        quats = _unit_quats(rng, count)
        scales = rng.uniform(0.05, 1.0, size=(count, 3))
        sensor = Pose.from_yaw(0.3, [1.0, -2.0, 0.5])
        before = to_sensor_spherical(_set(means, quats=quats, scales=scales), sensor)

        turn = _unit_quats(rng, 1)[0]
        rotation = quaternion_to_rotation(turn)
        moved_sensor = Pose.from_rotation_translation(rotation @ sensor.rotation, rotation @ sensor.translation)
        moved = _set(means @ rotation.T, quats=_quat_multiply(turn, quats), scales=scales)
        after = to_sensor_spherical(moved, moved_sensor)

        np.testing.assert_allclose(after.means, before.means, atol=1e-9)
        np.testing.assert_allclose(after.covariances, before.covariances, atol=1e-9)

    def test_pole_gaussians_are_skipped(self):
        sg = to_sensor_spherical(_set([[0.0, 0.0, 5.0], [5.0, 0.0, 0.0]]), Pose.identity())
        np.testing.assert_array_equal(sg.skipped, [0])
        np.testing.assert_array_equal(sg.indices, [1])


class TestRender:
    def test_empty_set(self, small_sensor):
        result = render_range_map(_set(np.zeros((0, 3))), Pose.identity(), small_sensor)
        assert result.range_map.occupied_count == 0
        assert not result.alpha.any()

    def test_all_degenerate(self, small_sensor):
        with pytest.raises(AllGaussiansDegenerate):
            render_range_map(_set([[0.0, 0.0, 5.0], [0.0, 0.0, -3.0]]), Pose.identity(), small_sensor)

    def test_single_tiny_gaussian(self, small_sensor):
        result = render_range_map(_set([_on_cell(small_sensor, 4, 10, 5.0)], features=0.3), Pose.identity(), small_sensor)
        rm = result.range_map
        assert rm.occupied_count == 1
        assert rm.occupancy[4, 10]
        assert rm.range[4, 10] == pytest.approx(5.0, abs=1e-3)
        assert rm.intensity[4, 10] == pytest.approx(0.3, abs=1e-6)
        assert result.alpha[4, 10] == pytest.approx(0.99, abs=1e-6)

    def test_two_gaussians_on_one_ray(self, small_sensor):
        near, far = _on_cell(small_sensor, 3, 20, 5.0), _on_cell(small_sensor, 3, 20, 7.0)
        result = render_range_map(_set([far, near]), Pose.identity(), small_sensor)
        weight_far = 0.99 * 0.01
        expected = (5.0 * 0.99 + 7.0 * weight_far) / (0.99 + weight_far)
        assert result.range_map.range[3, 20] == pytest.approx(expected, abs=1e-2)
        assert result.alpha[3, 20] == pytest.approx(0.99 + weight_far, abs=1e-6)

    def test_low_alpha_cell_is_dropped(self, small_sensor):
        result = render_range_map(_set([_on_cell(small_sensor, 2, 2, 5.0)], opacity=0.4), Pose.identity(), small_sensor)
        assert result.range_map.occupied_count == 0
        assert result.alpha[2, 2] == pytest.approx(0.4)

    def test_beyond_max_range_is_empty(self, small_sensor):
        result = render_range_map(_set([_on_cell(small_sensor, 2, 2, small_sensor.max_range + 10.0)]), Pose.identity(), small_sensor)
        assert result.range_map.occupied_count == 0

    def test_footprint_wraps_across_the_seam(self):
        m = make_sensor(height=8, width=64)
        result = render_range_map(_set([[-10.0, 0.0, 0.0]], sigma=1.0, opacity=0.9), Pose.identity(), m)
        assert result.alpha[4, 0] == pytest.approx(0.9)
        assert result.alpha[4, 63] > 0.0
        assert result.alpha[4, 63] == pytest.approx(result.alpha[4, 1], rel=1e-9)

    def test_sensor_pose_is_honoured(self, small_sensor):
        sensor = Pose.from_yaw(math.pi / 2, [3.0, 0.0, 0.0])
        world = sensor.apply([_on_cell(small_sensor, 4, 40, 6.0)])
        result = render_range_map(_set(world), sensor, small_sensor)
        assert result.range_map.occupancy[4, 40]
        assert result.range_map.range[4, 40] == pytest.approx(6.0, abs=1e-3)

    def test_blend_properties(self, small_sensor, rng):
        count = 400
        means = spherical_to_cartesian(
            np.column_stack(
                [
                    rng.uniform(-math.pi, math.pi, count),
                    rng.uniform(-0.3, 0.3, count),
                    rng.uniform(2.0, 40.0, count),
                ]
            )
        )
        gaussians = _set(means, sigma=0.2, opacity=rng.uniform(0.2, 0.95, count), features=rng.uniform(size=count))
        result = render_range_map(gaussians, Pose.identity(), small_sensor)
        rm = result.range_map
        assert np.all(result.alpha >= 0.0) and np.all(result.alpha < 1.0)
        assert np.all((rm.intensity >= 0.0) & (rm.intensity <= 1.0))

        contributes = _contributors(gaussians, small_sensor)
        distance = np.linalg.norm(means, axis=1)
        rows, cols = np.nonzero(rm.occupancy)
        for row, col in zip(rows, cols):
            members = contributes[row, col]
            assert members.any()
            assert distance[members].min() - 1e-4 <= rm.range[row, col] <= distance[members].max() + 1e-4
            features = gaussians.features[members]
            assert features.min() - 1e-6 <= rm.intensity[row, col] <= features.max() + 1e-6

        order = rng.permutation(count)
        shuffled = GaussianSet(
            gaussians.means[order],
            gaussians.scales[order],
            gaussians.rotations[order],
            gaussians.opacities[order],
            gaussians.features[order],
        )
        again = render_range_map(shuffled, Pose.identity(), small_sensor)
        np.testing.assert_array_equal(again.range_map.occupancy, rm.occupancy)
        np.testing.assert_allclose(again.range_map.range, rm.range, rtol=1e-6)
        np.testing.assert_allclose(again.alpha, result.alpha, atol=1e-12)
