import numpy as np
import pytest

from radarpc import synth
from radarpc.core import RigidTransform, SensorConfig
from radarpc.synth import (LABEL_CLUTTER, LABEL_GHOST, LABEL_TRUE,
                           ArtifactError, LabeledSweep, Scene, SceneError,
                           SceneGenConfig, default_sensor_rig, generate_scene,
                           inject_artifacts, simulate_lidar_sweep,
                           simulate_sweep)

from conftest import static_scene


def wide_sensor(sensor_id=0, max_range=100.0):
    return SensorConfig(sensor_id, RigidTransform.identity(), 360.0, 360.0,
                        max_range)


def test_zero_objects_gives_valid_empty_scene():
    cfg = SceneGenConfig(duration=0.2, n_objects=0)
    scene = generate_scene(cfg, seed=0)
    assert scene.objects == []
    assert scene.ego_centers.shape == (5, 3)
    scene.validate()


def test_scene_generation_is_deterministic():
    cfg = SceneGenConfig(duration=0.5, n_objects=4)
    a = generate_scene(cfg, seed=99).to_json()
    b = generate_scene(cfg, seed=99).to_json()
    assert a == b
    assert generate_scene(cfg, seed=100).to_json() != a


def test_scene_json_roundtrip_exact():
    scene = generate_scene(SceneGenConfig(duration=0.3, n_objects=3), seed=5)
    assert Scene.from_json(scene.to_json()).to_json() == scene.to_json()


def test_placement_failure_names_collider():
    cfg = SceneGenConfig(duration=0.05, n_objects=6, area=2.0,
                         categories=("truck",), placement_retries=5)
    with pytest.raises(SceneError, match="overlapping object"):
        generate_scene(cfg, seed=1)


def test_surround_rig_covers_full_circle():
    rig = default_sensor_rig()
    boresights = [np.arctan2(s.extrinsic.rotation[1, 0], s.extrinsic.rotation[0, 0])
                  for s in rig]
    halves = [np.deg2rad(s.fov_deg) / 2 for s in rig]
    rays = np.linspace(-np.pi, np.pi, 3600, endpoint=False)
    for az in rays:
        covered = any(abs(np.arctan2(np.sin(az - b), np.cos(az - b))) <= h
                      for b, h in zip(boresights, halves))
        assert covered, f"azimuth {np.rad2deg(az):.1f} deg uncovered"


def test_static_scene_doppler_is_zero_within_noise():
    scene = static_scene([(np.array([20.0, 0.0, 0.8]), (4.5, 1.9, 1.6), "car")],
                         [wide_sensor()])
    sigma = 0.05
    sweep = simulate_sweep(scene, 0, 0.0, noise_sigma_xyz=sigma, seed=7)
    assert len(sweep.points) > 10
    assert np.abs(sweep.points.doppler).max() <= 3 * sigma + 1e-12


def test_receding_object_has_positive_doppler():
    # pedestrian far down the +x axis, walking straight away at 5 m/s
    n = 5
    centers = np.array([[40.0 + 5.0 * i / 20.0, 0.0, 0.9] for i in range(n)])
    track = synth.ObjectTrack(0, "pedestrian", (0.6, 0.6, 1.8), 8.0, 3.0,
                              centers, np.zeros(n),
                              np.tile([5.0, 0.0], (n, 1)))
    scene = Scene([wide_sensor()], np.zeros((n, 3)), np.zeros(n), [track],
                  (n - 1) / 20.0, 20.0)
    sweep = simulate_sweep(scene, 0, 0.0, seed=3)
    assert len(sweep.points) > 5
    assert np.all(sweep.points.doppler > 4.9)
    assert np.abs(sweep.points.doppler - 5.0).max() < 0.05


def test_doppler_matches_finite_difference_range_rate():
    cfg = SceneGenConfig(duration=0.5, n_objects=5, area=25.0,
                         object_speed_max=8.0, ego_speed_max=5.0)
    scene = generate_scene(cfg, seed=11)
    eps = 1e-4
    checked = 0
    for sid in range(6):
        t = float(scene.timestamps[4])
        sweep = simulate_sweep(scene, sid, t, seed=0)
        if len(sweep.points) == 0:
            continue
        for obj in scene.objects:
            mask = sweep.object_ids == obj.id
            if not mask.any():
                continue
            srng = np.random.default_rng([0, 101, obj.id])
            local = synth._surface_points_local(obj, srng)

            def world_at(tt):
                c = obj.center_at(tt, scene.frame_rate)
                rot = synth._rotz(obj.yaw_at(tt, scene.frame_rate))
                return c + local @ rot.T

            def origin_at(tt):
                return scene.sensor_pose_at(sid, tt).translation

            r0 = np.linalg.norm(world_at(t) - origin_at(t), axis=1)
            r1 = np.linalg.norm(world_at(t + eps) - origin_at(t + eps), axis=1)
            rate = (r1 - r0) / eps
            pose, _ = synth._sensor_world_state(scene, sid, scene.frame_index(t))
            vis = synth.frustum_mask(pose.inverse().apply(world_at(t)),
                                     scene.sensor(sid))
            assert np.abs(sweep.points.doppler[mask] - rate[vis]).max() < 1e-3
            checked += int(mask.sum())
    assert checked >= 50


def test_sweep_is_deterministic_and_respects_frustum():
    cfg = SceneGenConfig(duration=0.2, n_objects=5, area=25.0)
    scene = generate_scene(cfg, seed=2)
    for sid in (0, 3):
        a = simulate_sweep(scene, sid, 0.05, noise_sigma_xyz=0.03, seed=9)
        b = simulate_sweep(scene, sid, 0.05, noise_sigma_xyz=0.03, seed=9)
        assert np.array_equal(a.points.xyz, b.points.xyz)
        assert np.array_equal(a.points.doppler, b.points.doppler)
        sensor = scene.sensor(sid)
        assert synth.frustum_mask(a.points.xyz, sensor).all()


def test_unknown_sensor_and_timestamp_fail():
    scene = generate_scene(SceneGenConfig(duration=0.1, n_objects=1), seed=0)
    with pytest.raises(SceneError, match="sensor"):
        simulate_sweep(scene, 42, 0.0)
    with pytest.raises(SceneError, match="timestamp"):
        simulate_sweep(scene, 0, 0.123)


def test_lidar_sweep_has_ground_and_objects():
    scene = static_scene([(np.array([10.0, 2.0, 0.8]), (4.5, 1.9, 1.6), "car")],
                         [wide_sensor()])
    sweep = simulate_lidar_sweep(scene, 0.0, seed=1, ground_extent=20.0)
    assert (sweep.labels == synth.LABEL_GROUND).sum() > 100
    assert (sweep.labels == LABEL_TRUE).sum() > 100
    ground = sweep.points.xyz[sweep.labels == synth.LABEL_GROUND]
    assert np.abs(ground[:, 2]).max() < 1e-12
    assert sweep.points.frame_id == "reference"


# --- artifact injection -------------------------------------------------------

def _single_point_sweep(xyz, sensor):
    from radarpc.core import PointCloud
    cloud = PointCloud(np.array([xyz]), np.array([5.0]), np.array([1.0]),
                       np.array([sensor.sensor_id], np.int64), np.array([0.0]),
                       f"sensor{sensor.sensor_id}")
    return LabeledSweep(cloud, np.array([LABEL_TRUE], "<U12"),
                        np.array([3], np.int64))


def test_inject_nothing_is_identity():
    sensor = wide_sensor()
    sweep = _single_point_sweep([4.0, 0.0, 1.0], sensor)
    out = inject_artifacts(sweep, sensor, 0, 0, [])
    assert out is sweep


def test_ghost_mirror_formula():
    sensor = wide_sensor()
    sweep = _single_point_sweep([4.0, 0.0, 1.0], sensor)
    plane = (np.array([1.0, 0.0, 0.0]), 10.0)  # plane x = 10
    out = inject_artifacts(sweep, sensor, 1, 0, [plane], seed=0,
                           min_separation=2.0)
    assert len(out.points) == 2
    assert out.labels[1] == LABEL_GHOST
    assert np.allclose(out.points.xyz[1], [16.0, 0.0, 1.0])
    # ghost inherits the source attributes
    assert out.points.rcs[1] == sweep.points.rcs[0]
    assert out.points.doppler[1] == sweep.points.doppler[0]
    assert out.object_ids[1] == -1


def test_clutter_respects_separation(rng):
    sensor = wide_sensor(max_range=60.0)
    from radarpc.core import PointCloud
    n = 40
    xyz = np.column_stack([rng.uniform(5, 25, n), rng.uniform(-10, 10, n),
                           rng.uniform(0, 2, n)])
    cloud = PointCloud(xyz, np.zeros(n), np.zeros(n),
                       np.zeros(n, np.int64), np.zeros(n), "sensor0")
    sweep = LabeledSweep(cloud, np.full(n, LABEL_TRUE, "<U12"),
                         np.zeros(n, np.int64))
    out = inject_artifacts(sweep, sensor, 0, 50, [], seed=4, min_separation=2.0)
    clutter = out.points.xyz[out.labels == LABEL_CLUTTER]
    assert clutter.shape[0] == 50
    d = np.linalg.norm(clutter[:, None, :] - xyz[None, :, :], axis=-1)
    assert d.min() >= 2.0
    assert synth.frustum_mask(clutter, sensor).all()


def test_artifact_ordering_and_determinism():
    sensor = wide_sensor()
    sweep = _single_point_sweep([4.0, 0.0, 1.0], sensor)
    planes = [(np.array([1.0, 0.0, 0.0]), 12.0),
              (np.array([0.0, 1.0, 0.0]), 8.0)]
    a = inject_artifacts(sweep, sensor, 2, 3, planes, seed=5)
    b = inject_artifacts(sweep, sensor, 2, 3, planes, seed=5)
    assert np.array_equal(a.points.xyz, b.points.xyz)
    assert list(a.labels) == [LABEL_TRUE, LABEL_GHOST, LABEL_GHOST,
                              LABEL_CLUTTER, LABEL_CLUTTER, LABEL_CLUTTER]


def test_ghost_without_planes_fails():
    sensor = wide_sensor()
    sweep = _single_point_sweep([4.0, 0.0, 1.0], sensor)
    with pytest.raises(ArtifactError, match="reflector"):
        inject_artifacts(sweep, sensor, 1, 0, [])


def test_impossible_clutter_placement_fails():
    # frustum so tight that no clutter can sit 2 m away from the return
    sensor = SensorConfig(0, RigidTransform.identity(), 4.0, 4.0, 2.0)
    sweep = _single_point_sweep([1.0, 0.0, 1.0], sensor)
    with pytest.raises(ArtifactError, match="clutter"):
        inject_artifacts(sweep, sensor, 0, 1, [], seed=0, min_separation=2.0,
                         max_tries=50)
