from __future__ import annotations

import math
import zlib

import numpy as np
import pytest

from lidar_evs import rng as streams
from lidar_evs.curation import (
    LEFT,
    RIGHT,
    CurationOptions,
    adjust_intensity,
    curate,
    estimate_normals,
    fuse,
    occlusion_curl,
    raycast,
    sample_shift_direction,
    select_window,
    shift_pose,
    transform_to_view,
)
from lidar_evs.errors import EmptyWindow, NeighborhoodTooSmall
from lidar_evs.fixtures import corridor_frames, sphere_frame, two_plane_frame
from lidar_evs.geom import Pose, cartesian_to_spherical, spherical_to_cartesian
from lidar_evs.models import FusionConfig, LidarFrame, PseudoScan, SensorModel
from lidar_evs.sensor import rasterize

from conftest import make_sensor, random_rotation
from test_sensor import _brute_force_cells


def _frame(points, timestamp: int, dynamic=None, pose: Pose | None = None) -> LidarFrame:
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return LidarFrame(
        points=points,
        intensities=np.full(len(points), 0.5),
        dynamic_flags=np.zeros(len(points), dtype=bool) if dynamic is None else dynamic,
        pose=pose or Pose.identity(),
        timestamp=timestamp,
    )


def _random_sensor(rng: np.random.Generator) -> SensorModel:
    height = int(rng.integers(1, 48))
    width = int(rng.integers(4, 1100))
    if rng.random() < 0.5:
        azimuth = (-math.pi, math.pi)
    else:
        low = rng.uniform(-math.pi, 0.0)
        azimuth = (low, rng.uniform(low + 0.2, math.pi))
    low = rng.uniform(-1.2, 0.0)
    elevation = (low, rng.uniform(low + 0.1, 1.2))
    return SensorModel(height, width, azimuth, elevation, float(rng.uniform(5.0, 80.0)))


class TestFusion:
    def test_window_order_by_time_distance(self):
        frames = [_frame(np.ones((1, 3)), t) for t in (0, 100, 200, 300, 400)]
        assert select_window(frames, 2, 10) == [2, 1, 3, 0, 4]
        assert select_window(frames, 2, 3) == [2, 1, 3]
        assert select_window(frames, 0, 1) == [0]

    def test_empty_input(self):
        with pytest.raises(EmptyWindow):
            select_window([], 0, 3)

    def test_window_of_one_is_current_frame(self):
        current = _frame([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], 0, dynamic=np.array([False, True]))
        other = _frame([[3.0, 0.0, 0.0]], 10)
        fused = fuse([current, other], 0, FusionConfig(window=1))
        np.testing.assert_array_equal(fused.points, current.points)

    def test_dynamic_points_only_from_current(self):
        current = _frame([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]], 0, dynamic=np.array([False, True]))
        other = _frame([[3.0, 0.0, 0.0], [4.0, 0.0, 0.0]], 10, dynamic=np.array([True, False]))
        fused = fuse([current, other], 0, FusionConfig(window=2))
        np.testing.assert_array_equal(fused.points[:, 0], [1.0, 2.0, 4.0])
        np.testing.assert_array_equal(fused.source_frame_ids, [0, 0, 1])

    def test_points_are_placed_in_world(self):
        moved = _frame([[1.0, 0.0, 0.0]], 10, pose=Pose.from_yaw(math.pi / 2, [5.0, 0.0, 0.0]))
        fused = fuse([_frame([[1.0, 0.0, 0.0]], 0), moved], 0, FusionConfig(window=2))
        np.testing.assert_allclose(fused.points[1], [5.0, 1.0, 0.0], atol=1e-12)

    def test_view_round_trip(self, rng):
        for _ in range(20):
            target = Pose.from_rotation_translation(random_rotation(rng), rng.uniform(-100, 100, size=3))
            local = rng.uniform(-50, 50, size=(100, 3))
            np.testing.assert_allclose(transform_to_view(target.apply(local), target), local, atol=1e-6)


class TestShift:
    def test_left_is_positive_sensor_y(self):
        assert np.allclose(shift_pose(Pose.identity(), 4.0).translation, [0.0, 4.0, 0.0])
        assert np.allclose(shift_pose(Pose.identity(), RIGHT * 4.0).translation, [0.0, -4.0, 0.0])

    def test_shift_follows_heading(self):
        base = Pose.from_yaw(math.pi / 2, [10.0, 0.0, 0.0])
        shifted = shift_pose(base, LEFT * 3.0)
        np.testing.assert_allclose(shifted.translation, [7.0, 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(shifted.rotation, base.rotation)

    def test_zero_shift_is_identity(self, rng):
        base = Pose.from_rotation_translation(random_rotation(rng), rng.uniform(-5, 5, size=3))
        assert shift_pose(base, 0.0).allclose(base)

    def test_direction_is_reproducible(self):
        first = [sample_shift_direction(streams.stream(42, streams.SHIFT_DIRECTION, i)) for i in range(64)]
        second = [sample_shift_direction(streams.stream(42, streams.SHIFT_DIRECTION, i)) for i in range(64)]
        assert first == second
        assert set(first) == {LEFT, RIGHT}

    def test_direction_is_balanced(self):
        generator = streams.stream(42, streams.SHIFT_DIRECTION)
        draws = np.array([sample_shift_direction(generator) for _ in range(100_000)])
        assert abs(draws.mean()) <= 0.02

    def test_seed_42_sequence_is_frozen(self):
        # one stream per frame index: Philox over SeedSequence([seed, crc32(purpose), frame])
        purpose = zlib.crc32(b"shift-direction")
        expected = [
            LEFT if np.random.Generator(np.random.Philox(np.random.SeedSequence([42, purpose, frame]))).random() < 0.5 else RIGHT
            for frame in range(32)
        ]
        actual = [sample_shift_direction(streams.stream(42, streams.SHIFT_DIRECTION, frame)) for frame in range(32)]
        assert actual == expected


class TestRaycast:
    def test_matches_brute_force_on_random_clouds(self, rng):
        for _ in range(100):
            m = _random_sensor(rng)
            count = int(rng.integers(100, 10_001))
            points = rng.uniform(-1.5 * m.max_range, 1.5 * m.max_range, size=(count, 3))
            duplicated = rng.choice(count, size=count // 20, replace=False)
            points = np.concatenate([points, points[duplicated]])

            mask = raycast(points, m)
            expected = np.zeros(len(points), dtype=bool)
            expected[[index for _, index in _brute_force_cells(points, m).values()]] = True
            np.testing.assert_array_equal(mask, expected)

    def test_invalid_points_never_survive(self, small_sensor):
        points = [[0.0, 0.0, 0.0], [small_sensor.max_range * 2, 0.0, 0.0], [0.0, 0.0, 50.0], [5.0, 0.0, 0.0]]
        np.testing.assert_array_equal(raycast(points, small_sensor), [False, False, False, True])

    def test_two_plane_occlusion(self, default_sensor):
        frame, covered_cols = two_plane_frame(default_sensor)
        cells = default_sensor.cell_count
        far, near = frame.points[:cells], frame.points[cells:]
        mask = raycast(frame.points, default_sensor)
        far_cols = np.tile(np.arange(default_sensor.width), default_sensor.height)

        far_survives = mask[:cells]
        assert not far_survives[far_cols < covered_cols].any()
        assert far_survives[far_cols >= covered_cols].all()
        assert mask[cells:].all()
        assert len(near) == covered_cols * default_sensor.height
        np.testing.assert_allclose(np.linalg.norm(far, axis=1), 10.0)

    def test_occlusion_curl_keeps_one_point_per_cell(self, small_sensor, rng):
        points = rng.uniform(-20, 20, size=(5000, 3))
        scan = PseudoScan(points, rng.uniform(size=5000), np.zeros(5000, dtype=np.int64))
        curled = occlusion_curl(scan, small_sensor)
        assert len(curled) == rasterize(points, scan.intensities, small_sensor).occupied_count
        assert len(curled) <= small_sensor.cell_count

    def test_occlusion_curl_is_idempotent(self, small_sensor, rng):
        points = rng.uniform(-30, 30, size=(8000, 3))
        scan = PseudoScan(points, rng.uniform(size=8000), np.zeros(8000, dtype=np.int64))
        once = occlusion_curl(scan, small_sensor)
        twice = occlusion_curl(once, small_sensor)
        np.testing.assert_array_equal(twice.points, once.points)
        np.testing.assert_array_equal(twice.intensities, once.intensities)

    def test_duplicated_cloud_curls_like_single_copy(self, small_sensor, rng):
        points = rng.uniform(-30, 30, size=(3000, 3))
        intensities = rng.uniform(size=3000)
        single = occlusion_curl(PseudoScan(points, intensities, np.zeros(3000, dtype=np.int64)), small_sensor)
        doubled = occlusion_curl(
            PseudoScan(np.repeat(points, 2, axis=0), np.repeat(intensities, 2), np.zeros(6000, dtype=np.int64)),
            small_sensor,
        )
        np.testing.assert_array_equal(doubled.points, single.points)
        np.testing.assert_array_equal(doubled.intensities, single.intensities)


class TestNormals:
    def test_plane_normals(self, rng):
        points = np.column_stack([rng.uniform(-5, 5, size=(2000, 2)), np.zeros(2000)])
        estimate = estimate_normals(points, [0.0, 0.0, 5.0])
        angles = np.arccos(np.clip(estimate.normals @ [0.0, 0.0, 1.0], -1.0, 1.0))
        assert angles.max() < 1e-3
        assert estimate.degenerate_count == 0

    def test_normals_face_the_sensor(self, rng):
        points = np.column_stack([rng.uniform(-5, 5, size=(500, 2)), np.zeros(500)])
        estimate = estimate_normals(points, [0.0, 0.0, -3.0])
        np.testing.assert_allclose(estimate.normals[:, 2], -1.0, atol=1e-9)

    def test_sphere_normals_are_radial(self):
        frame = sphere_frame(count=1000)
        world = frame.pose.apply(frame.points)
        estimate = estimate_normals(world, frame.pose.translation, k=16)
        radial = world / np.linalg.norm(world, axis=1, keepdims=True)
        cosine = np.abs(np.einsum("ni,ni->n", estimate.normals, radial))
        assert np.mean(cosine >= math.cos(math.radians(5.0))) >= 0.95

    def test_coincident_neighbourhood_points_at_sensor(self):
        points = np.zeros((20, 3)) + [3.0, 4.0, 0.0]
        estimate = estimate_normals(points, [0.0, 0.0, 0.0])
        assert estimate.degenerate.all()
        np.testing.assert_allclose(estimate.normals, np.tile([-0.6, -0.8, 0.0], (20, 1)))

    def test_too_few_points(self):
        with pytest.raises(NeighborhoodTooSmall):
            estimate_normals(np.zeros((5, 3)), [0.0, 0.0, 1.0], k=16)


class TestIntensity:
    def test_identity_when_rays_coincide(self, rng):
        normals = rng.normal(size=(1000, 3))
        rays = rng.normal(size=(1000, 3))
        intensity = rng.uniform(size=1000)
        adjusted, passthrough = adjust_intensity(intensity, normals, rays, rays)
        np.testing.assert_array_equal(adjusted, intensity)

    def test_sixty_degrees_to_normal_incidence(self):
        incidence = math.radians(60.0)
        adjusted, passthrough = adjust_intensity(
            [0.3],
            [[0.0, 0.0, 1.0]],
            [[math.sin(incidence), 0.0, -math.cos(incidence)]],
            [[0.0, 0.0, -1.0]],
        )
        assert adjusted[0] == pytest.approx(0.6, abs=1e-6)
        assert not passthrough[0]

    def test_ray_length_does_not_matter(self):
        a, _ = adjust_intensity([0.4], [[0.0, 0.0, 1.0]], [[1.0, 0.0, -1.0]], [[0.0, 1.0, -2.0]])
        b, _ = adjust_intensity([0.4], [[0.0, 0.0, 1.0]], [[10.0, 0.0, -10.0]], [[0.0, 0.5, -1.0]])
        assert a[0] == pytest.approx(b[0])

    def test_grazing_passes_through(self):
        adjusted, passthrough = adjust_intensity([0.7], [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]], [[0.0, 0.0, -1.0]])
        assert adjusted[0] == 0.7
        assert passthrough[0]

    def test_outputs_stay_in_unit_interval(self, rng):
        count = 100_000
        adjusted, _ = adjust_intensity(
            rng.uniform(size=count),
            rng.normal(size=(count, 3)),
            rng.normal(size=(count, 3)),
            rng.normal(size=(count, 3)),
        )
        assert adjusted.min() >= 0.0 and adjusted.max() <= 1.0


class TestCurate:
    def test_zero_shift_single_frame_matches_rasterization(self, rng):
        m = make_sensor(height=16, width=256, max_range=60.0)
        for _ in range(20):
            count = int(rng.integers(200, 3000))
            points = rng.uniform(-40, 40, size=(count, 3))
            frame = LidarFrame(
                points=points,
                intensities=rng.uniform(size=count),
                dynamic_flags=np.zeros(count, dtype=bool),
                pose=Pose.from_yaw(rng.uniform(-math.pi, math.pi), rng.uniform(-10, 10, size=3)),
                timestamp=0,
            )
            scan = curate([frame], 0, m, FusionConfig(window=1), shift_pose(frame.pose, 0.0))
            expected = rasterize(frame.points, frame.intensities, m)
            assert rasterize(scan.points, scan.intensities, m).same_as(expected)

    def test_zero_shift_keeps_points_on_cell_boundaries(self, rng):
        m = make_sensor(height=16, width=256, max_range=60.0)
        count = 2000
        for _ in range(20):
            columns = rng.integers(0, m.width - 1, size=count)
            rows = rng.integers(0, m.height - 1, size=count)
            spherical = np.column_stack(
                [
                    m.azimuth_fov[0] + (columns + 0.5) * (m.azimuth_span / m.width),
                    m.elevation_fov[0] + (rows + 0.5) * (m.elevation_span / m.height),
                    rng.uniform(1.0, 50.0, size=count),
                ]
            )
            frame = LidarFrame(
                points=spherical_to_cartesian(spherical),
                intensities=rng.uniform(size=count),
                dynamic_flags=np.zeros(count, dtype=bool),
                pose=Pose.from_rotation_translation(random_rotation(rng), rng.uniform(-10, 10, size=3)),
                timestamp=0,
            )
            scan = curate([frame], 0, m, FusionConfig(window=1), shift_pose(frame.pose, 0.0))
            expected = rasterize(frame.points, frame.intensities, m)
            assert rasterize(scan.points, scan.intensities, m).same_as(expected)

    def test_fused_view_of_own_pose_keeps_coordinates(self, rng):
        points = rng.uniform(-20, 20, size=(500, 3))
        frame = _frame(points, 0, pose=Pose.from_rotation_translation(random_rotation(rng), [3.0, -2.0, 1.0]))
        fused = fuse([frame], 0, FusionConfig(window=1), view=frame.pose)
        np.testing.assert_array_equal(fused.points, frame.points)

    def test_tiny_frame_without_intensity_adjustment(self, small_sensor):
        frame = _frame([[5.0, 0.0, 0.0], [0.0, 6.0, 0.0], [-7.0, 0.0, 0.0]], 0)
        scan = curate([frame], 0, small_sensor, FusionConfig(window=1), frame.pose, CurationOptions(adjust_intensity=False))
        assert len(scan) == 3
        assert scan.normals is None
        np.testing.assert_array_equal(scan.intensities, frame.intensities)

    def test_tiny_frame_normals_face_the_sensor(self, small_sensor):
        frame = _frame([[5.0, 0.0, 0.0], [0.0, 6.0, 0.0], [-7.0, 0.0, 0.0]], 0)
        scan = curate([frame], 0, small_sensor, FusionConfig(window=1), frame.pose)
        np.testing.assert_allclose(scan.normals, [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
        assert scan.provenance["degenerate_normal_count"] == 3
        np.testing.assert_allclose(scan.intensities, frame.intensities)

    def test_provenance_counts(self):
        m = make_sensor(height=16, width=256)
        frames = corridor_frames(m, count=4, current=2)
        scan = curate(frames, 2, m, FusionConfig(window=3), shift_pose(frames[2].pose, 4.0))
        assert scan.provenance["window"] == 3
        assert scan.provenance["survivor_count"] == len(scan)
        assert scan.provenance["fused_point_count"] >= len(scan)
        assert set(scan.provenance["source_frame_ids"]) <= {1, 2, 3}
        assert scan.normals.shape == scan.points.shape

    def test_disabling_intensity_adjustment_keeps_source_values(self):
        m = make_sensor(height=16, width=256)
        frames = corridor_frames(m, count=3, current=1)
        target = shift_pose(frames[1].pose, 4.0)
        plain = curate(frames, 1, m, FusionConfig(window=3), target, CurationOptions(adjust_intensity=False))
        relit = curate(frames, 1, m, FusionConfig(window=3), target)
        np.testing.assert_array_equal(plain.points, relit.points)
        assert not np.array_equal(plain.intensities, relit.intensities)
        assert plain.provenance["intensity_adjusted"] is False

    def test_results_do_not_depend_on_workers(self):
        m = make_sensor(height=16, width=256)
        frames = corridor_frames(m, count=3, current=1)
        target = shift_pose(frames[1].pose, -4.0)
        one = curate(frames, 1, m, FusionConfig(window=3), target, CurationOptions(workers=1))
        many = curate(frames, 1, m, FusionConfig(window=3), target, CurationOptions(workers=4))
        np.testing.assert_array_equal(one.points, many.points)
        np.testing.assert_array_equal(one.intensities, many.intensities)

    def test_more_frames_reveal_more_cells(self, default_sensor):
        frames = corridor_frames(default_sensor)
        target = shift_pose(frames[5].pose, LEFT * 4.0)
        options = CurationOptions(adjust_intensity=False)
        occupied = [len(curate(frames, 5, default_sensor, FusionConfig(window=w), target, options)) for w in (1, 5, 10)]
        assert occupied[0] <= occupied[1] <= occupied[2]
        assert occupied[2] >= 1.1 * occupied[0]

    def test_survivors_are_in_view(self):
        m = make_sensor(height=16, width=256)
        frames = corridor_frames(m, count=3, current=1)
        scan = curate(frames, 1, m, FusionConfig(window=3), shift_pose(frames[1].pose, 4.0))
        spherical = cartesian_to_spherical(scan.points)
        assert np.all(spherical[:, 2] <= m.max_range)
        assert np.all(spherical[:, 1] >= m.elevation_fov[0])
