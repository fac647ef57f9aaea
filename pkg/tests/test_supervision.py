import logging

import numpy as np
import pytest

from radarpc import synth
from radarpc.core import (PSEUDO_SENSOR_ID, Box3D, PointCloud, RigidTransform,
                          SensorConfig, points_in_box_mask)
from radarpc.supervision import (GroundParams, SupervisionTarget,
                                 extract_box_foreground, inject_foreground,
                                 make_pseudo_radar_fg, remove_ground)

from conftest import random_cloud, static_scene


def _lidar_scene():
    sensor = SensorConfig(0, RigidTransform.identity(), 360.0, 360.0, 100.0)
    return static_scene(
        [(np.array([12.0, 0.0, 1.1]), (4.5, 1.9, 1.6), "car"),
         (np.array([-8.0, 6.0, 1.2]), (4.5, 1.9, 1.6), "car")],
        [sensor])


def test_ransac_removes_flat_ground_and_keeps_objects():
    scene = _lidar_scene()  # boxes sit on z in [0.3, 1.9 / 2.0]
    sweep = synth.simulate_lidar_sweep(scene, 0.0, seed=2, ground_extent=25.0)
    params = GroundParams(method="plane_ransac", inlier_tol=0.15, seed=1)
    out = remove_ground(sweep.points, params)
    # oracle: the simulator's labels
    ground = sweep.labels == synth.LABEL_GROUND
    objects = sweep.labels == synth.LABEL_TRUE
    assert len(out) == int(objects.sum())
    # every surviving point is an object point (positions are unique here)
    obj_xyz = sweep.points.xyz[objects]
    assert np.array_equal(np.sort(out.xyz, axis=0), np.sort(obj_xyz, axis=0))
    assert ground.sum() > 100


def test_remove_ground_empty_cloud():
    out = remove_ground(PointCloud.empty("reference"), GroundParams())
    assert len(out) == 0


def test_z_threshold_minus_inf_is_identity(rng):
    cloud = random_cloud(rng, 50)
    params = GroundParams(method="z_threshold", z_cut=-np.inf)
    out = remove_ground(cloud, params)
    assert np.array_equal(out.xyz, cloud.xyz)


def test_ransac_falls_back_when_no_horizontal_plane(rng, caplog):
    # a vertical wall: the dominant plane has |normal.z| ~ 0
    n = 200
    xyz = np.column_stack([np.full(n, 5.0), rng.uniform(-10, 10, n),
                           rng.uniform(-1, 3, n)])
    cloud = PointCloud(xyz, np.zeros(n), np.zeros(n), np.zeros(n, np.int64),
                       np.zeros(n), "reference")
    params = GroundParams(method="plane_ransac", z_cut=0.5, seed=0)
    with caplog.at_level(logging.WARNING, logger="radarpc.supervision"):
        out = remove_ground(cloud, params)
    assert "falling back" in caplog.text
    assert len(out) == int((xyz[:, 2] >= 0.5).sum())


def test_extract_with_no_boxes_is_empty_map(rng):
    assert extract_box_foreground(random_cloud(rng, 10), []) == {}


def test_extract_center_point():
    box = Box3D(np.array([3.0, 2.0, 1.0]), (2, 2, 2), 0.4, "car", id=9)
    cloud = PointCloud(np.array([[3.0, 2.0, 1.0]]), np.zeros(1), np.zeros(1),
                       np.zeros(1, np.int64), np.zeros(1), "reference")
    fg = extract_box_foreground(cloud, [box])
    assert len(fg[9]) == 1


def test_extract_matches_bruteforce_scan(rng):
    cloud = random_cloud(rng, 500, extent=20.0)
    boxes = [Box3D(rng.uniform(-15, 15, 3), tuple(rng.uniform(1, 8, 3)),
                   rng.uniform(-np.pi, np.pi), "car", id=i)
             for i in range(5)]
    fg = extract_box_foreground(cloud, boxes)
    from radarpc.core import point_in_box
    for box in boxes:
        expected = [i for i in range(len(cloud))
                    if point_in_box(cloud.xyz[i], box)]
        assert np.array_equal(fg[box.id].xyz, cloud.xyz[expected])


def test_overlapping_boxes_duplicate_points():
    p = np.array([[0.0, 0.0, 0.0]])
    cloud = PointCloud(p, np.zeros(1), np.zeros(1), np.zeros(1, np.int64),
                       np.zeros(1), "reference")
    boxes = [Box3D(np.zeros(3), (2, 2, 2), 0.0, "car", id=0),
             Box3D(np.array([0.5, 0, 0]), (2, 2, 2), 0.0, "car", id=1)]
    fg = extract_box_foreground(cloud, boxes)
    pseudo, _ = make_pseudo_radar_fg(fg, cloud, boxes, keyframe_t=0.0)
    assert len(pseudo) == 2  # one pseudo point per containing box


def test_pseudo_attributes_are_box_means():
    box = Box3D(np.zeros(3), (4, 4, 4), 0.0, "car", id=0)
    radar = PointCloud(np.array([[0.5, 0, 0], [-0.5, 0, 0]]),
                       np.array([2.0, 4.0]), np.array([-1.0, 3.0]),
                       np.zeros(2, np.int64), np.zeros(2), "reference")
    lidar_fg = {0: PointCloud(np.array([[0.1, 0.2, 0.0], [0.0, -0.3, 0.5]]),
                              np.zeros(2), np.zeros(2), np.zeros(2, np.int64),
                              np.zeros(2), "reference")}
    pseudo, fallbacks = make_pseudo_radar_fg(lidar_fg, radar, [box], 0.35)
    assert fallbacks == []
    assert np.all(pseudo.rcs == 3.0)
    assert np.all(pseudo.doppler == 1.0)
    assert np.all(pseudo.sensor_id == PSEUDO_SENSOR_ID)
    assert np.all(pseudo.t == 0.35)


def test_pseudo_fallback_for_radar_empty_box():
    box = Box3D(np.array([20.0, 0, 0]), (2, 2, 2), 0.0, "car", id=3)
    radar = PointCloud.empty("reference")
    lidar_fg = {3: PointCloud(np.array([[20.0, 0, 0]]), np.zeros(1),
                              np.zeros(1), np.zeros(1, np.int64), np.zeros(1),
                              "reference")}
    pseudo, fallbacks = make_pseudo_radar_fg(lidar_fg, radar, [box], 0.0)
    assert fallbacks == [3]
    assert pseudo.rcs[0] == 0.0 and pseudo.doppler[0] == 0.0


def test_pseudo_means_match_recomputation_on_synth_frame(rng):
    scene = _lidar_scene()
    lidar = synth.simulate_lidar_sweep(scene, 0.0, seed=5, ground_extent=20.0)
    radar = synth.simulate_sweep(scene, 0, 0.0, noise_sigma_xyz=0.05, seed=5)
    boxes = scene.boxes_at(0)
    no_ground = remove_ground(lidar.points, GroundParams(seed=2))
    fg = extract_box_foreground(no_ground, boxes)
    pseudo, _ = make_pseudo_radar_fg(fg, radar.points, boxes, 0.0)
    for box in boxes:
        m = points_in_box_mask(pseudo.xyz, box)
        if not m.any():
            continue
        radar_in = points_in_box_mask(radar.points.xyz, box)
        assert radar_in.any()
        expect_rcs = np.mean(radar.points.rcs[radar_in])
        expect_dop = np.mean(radar.points.doppler[radar_in])
        assert np.all(pseudo.rcs[m] == expect_rcs)       # exact, no tolerance
        assert np.all(pseudo.doppler[m] == expect_dop)


def test_inject_empty_foreground(rng):
    radar = random_cloud(rng, 30)
    target = inject_foreground(radar, PointCloud.empty(radar.frame_id))
    assert len(target.target_cloud) == 30
    assert not target.fg_mask.any()
    assert np.array_equal(target.background.xyz, radar.xyz)


def test_inject_empty_background(rng):
    fg = random_cloud(rng, 10)
    target = inject_foreground(PointCloud.empty(fg.frame_id), fg)
    assert target.fg_mask.all()
    assert np.array_equal(target.foreground.xyz, fg.xyz)


def test_inject_counts_add_and_background_bit_identical(rng):
    radar = random_cloud(rng, 40)
    fg = random_cloud(rng, 15)
    target = inject_foreground(radar, fg)
    assert len(target.target_cloud) == 55
    bg = target.background
    assert np.array_equal(bg.xyz, radar.xyz)
    assert np.array_equal(bg.rcs, radar.rcs)
    assert np.array_equal(bg.doppler, radar.doppler)
    assert np.array_equal(bg.sensor_id, radar.sensor_id)
    assert np.array_equal(bg.t, radar.t)


def test_all_pseudo_points_inside_some_box(rng):
    scene = _lidar_scene()
    lidar = synth.simulate_lidar_sweep(scene, 0.0, seed=8, ground_extent=20.0)
    radar = synth.simulate_sweep(scene, 0, 0.0, seed=8)
    boxes = scene.boxes_at(0)
    fg = extract_box_foreground(remove_ground(lidar.points, GroundParams(seed=3)),
                                boxes)
    pseudo, _ = make_pseudo_radar_fg(fg, radar.points, boxes, 0.0)
    inside = np.zeros(len(pseudo), dtype=bool)
    for box in boxes:
        inside |= points_in_box_mask(pseudo.xyz, box)
    assert inside.all()
