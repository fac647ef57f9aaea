"""Acceptance criteria, one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; plain `pytest` runs them silently as part of the suite.
"""
import json
import time

import numpy as np
import pytest

from radarpc import bev, io, metrics, supervision, synth
from radarpc.cli import main as cli_main
from radarpc.config import PipelineConfig, load_defaults
from radarpc.core import REFERENCE_FRAME, PointCloud, points_in_box_mask
from radarpc.enhance import HyperCloud
from radarpc.fusion import WindowSpec, align_to_reference, \
    compensate_and_accumulate
from radarpc.validation import ValidationParams, validate, validate_bruteforce

from test_validation import suppression_setup


def _report(name: str, detail: str = "") -> None:
    print(f"PASS {name}" + (f" ({detail})" if detail else ""))


# 1 ----------------------------------------------------------------------------

def test_validation_oracle_equivalence_100_frames():
    """validate == validate_bruteforce on 100 random frames, exact, < 30 s."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    total_points = 0
    for frame in range(100):
        clouds = {}
        n_sensors = int(rng.integers(1, 7))
        budget = int(rng.integers(50, 3001))
        for sid in range(n_sensors):
            n = budget // n_sensors
            xyz = rng.uniform(-60, 60, (n, 3))
            xyz[:, 2] = rng.uniform(0, 5, n)
            clouds[sid] = PointCloud(xyz, rng.normal(size=n), rng.normal(size=n),
                                     np.full(n, sid, np.int64),
                                     rng.uniform(0, 1, n), REFERENCE_FRAME)
            total_points += n
        params = ValidationParams(tau_d=float(rng.uniform(0.5, 12.0)),
                                  r=float(rng.uniform(0.2, 2.5)),
                                  k_min=int(rng.integers(1, 6)))
        _, fast = validate(clouds, params)
        _, brute = validate_bruteforce(clouds, params)
        assert np.array_equal(fast, brute), f"mismatch on frame {frame}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"took {elapsed:.1f} s"
    _report("validation oracle equivalence",
            f"100 frames, {total_points} points, {elapsed:.1f} s")


# 2 ----------------------------------------------------------------------------

def test_ghost_clutter_suppression_exact():
    """Constructed frames: 100% artifact removal, 0% true-return removal."""
    for seed in (0, 1, 2):
        per_sensor, labels = suppression_setup(seed=seed, ghosts=3, clutter=3)
        _, flags = validate(per_sensor, ValidationParams(10.0, 1.0, 3))
        artifacts = labels != synth.LABEL_TRUE
        assert artifacts.sum() == 6
        assert not flags[artifacts].any()
        assert flags[~artifacts].all()
    _report("ghost/clutter suppression", "3 seeds, 100%/0% split exact")


# 3 ----------------------------------------------------------------------------

def _accumulate_static(noise: float, seed: int):
    scene = synth.generate_scene(
        synth.SceneGenConfig(duration=0.5, n_objects=6, area=18.0,
                             object_speed_max=0.0, ego_speed_max=5.0), seed)
    w = WindowSpec(0.5, 20.0, keyframe_t=float(scene.timestamps[-1]))
    assert w.sweep_count == 11
    parts = []
    for sensor in scene.sensors:
        sweeps = {}
        for tau in w.timestamps():
            sw = synth.simulate_sweep(scene, sensor.sensor_id, tau,
                                      noise_sigma_xyz=noise, seed=seed)
            sweeps[(sensor.sensor_id, tau)] = align_to_reference(sw.points, sensor)
        parts.append(compensate_and_accumulate(sweeps, scene.ego_poses, w))
    return PointCloud.concat(parts, REFERENCE_FRAME)


def test_compensation_coincidence():
    """Static world, moving ego, 11 sweeps: exact coincidence with zero
    noise; with noise, the copies sit at noise scale around the static
    positions (RMS within 3 sigma; a broken compensation would show the
    per-frame ego displacement, orders of magnitude larger)."""
    clean = _accumulate_static(0.0, seed=20)
    assert len(clean) > 300
    keys = np.round(clean.xyz, 3)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    groups = 0
    for g in range(len(uniq)):
        pts = clean.xyz[inv == g]
        if len(pts) > 1:
            spread = np.linalg.norm(pts - pts.mean(axis=0), axis=1).max()
            assert spread < 1e-9
            groups += 1
    assert groups > 50

    sigma = 0.02
    noisy = _accumulate_static(sigma, seed=20)
    static_positions = np.unique(np.round(clean.xyz, 9), axis=0)
    from radarpc import kernels
    _, d2 = kernels.nearest_neighbor(noisy.xyz, static_positions)
    rms = float(np.sqrt(np.mean(d2)))
    assert rms <= 3 * sigma, f"rms deviation {rms:.4f} vs sigma {sigma}"
    _report("ego-motion compensation",
            f"{groups} multi-copy points exact; noisy rms {rms:.4f} <= 3*sigma")


# 4 ----------------------------------------------------------------------------

def test_bev_round_trips(tmp_path):
    rng = np.random.default_rng(7)
    spec = bev.DEFAULT_GRID
    half = spec.resolution / 2
    assert half == 0.09765625
    pts = rng.uniform(-49.5, 49.5, (400, 2))
    cloud = PointCloud(np.column_stack([pts, np.zeros(400)]), np.zeros(400),
                       np.zeros(400), np.zeros(400, np.int64), np.zeros(400),
                       REFERENCE_FRAME)
    grid = bev.rasterize(cloud, spec)
    rec = bev.derasterize(grid, 60)
    for p in pts:
        err = np.abs(rec[:, :2] - p).max(axis=1).min()
        assert err <= half + 1e-12
    cloud2 = PointCloud(np.column_stack([rec[:, :2], np.zeros(len(rec))]),
                        np.zeros(len(rec)), np.zeros(len(rec)),
                        np.zeros(len(rec), np.int64), np.zeros(len(rec)),
                        REFERENCE_FRAME)
    assert np.array_equal(bev.rasterize(cloud2, spec).intensity, grid.intensity)
    p1 = tmp_path / "grid.pgm"
    bev.write_pgm(grid, p1)
    back = bev.read_pgm(p1)
    p2 = tmp_path / "grid2.pgm"
    bev.write_pgm(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back.intensity, grid.intensity)
    _report("BEV round trips",
            "derasterize within res/2; binary fixed point; PGM byte-exact")


# 5 ----------------------------------------------------------------------------

def _matrix_min_sqdists(a, b):
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
    return d2.min(axis=1)


def test_metric_oracles_exact():
    rng = np.random.default_rng(99)
    for pair in range(50):
        a = rng.uniform(-30, 30, (int(rng.integers(1, 501)), 2))
        b = rng.uniform(-30, 30, (int(rng.integers(1, 501)), 2))
        dab = _matrix_min_sqdists(a, b)
        dba = _matrix_min_sqdists(b, a)
        assert metrics.chamfer(a, b) == float(np.mean(dab) + np.mean(dba))
        assert metrics.hausdorff(a, b) == float(np.sqrt(max(dab.max(), dba.max())))
        tau = float(rng.uniform(0.1, 5.0))
        prec = float(np.mean(dab <= tau * tau))
        rec = float(np.mean(dba <= tau * tau))
        expected_f = 0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec)
        assert metrics.fscore(a, b, tau) == expected_f
    x = rng.uniform(-5, 5, (120, 2))
    assert metrics.chamfer(x, x) == 0.0
    assert metrics.hausdorff(x, x) == 0.0
    assert metrics.fscore(x, x, 0.2) == 1.0
    # slow-route spot check: plain python loops on small pairs
    for _ in range(5):
        a = rng.uniform(-5, 5, (60, 2))
        b = rng.uniform(-5, 5, (70, 2))
        loop = np.array([min((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 for q in b)
                         for p in a])
        assert np.array_equal(loop, _matrix_min_sqdists(a, b))
    _report("metric oracles", "50 pairs exact vs O(n*m) brute force")


# 6 ----------------------------------------------------------------------------

def test_supervision_exactness():
    scene = synth.generate_scene(
        synth.SceneGenConfig(duration=0.2, n_objects=4, area=20.0), seed=31)
    for idx in (0, 2, 4):
        t = float(scene.timestamps[idx])
        radar_parts = [align_to_reference(
            synth.simulate_sweep(scene, s.sensor_id, t, 0.03, seed=31).points, s)
            for s in scene.sensors]
        validated = PointCloud.concat(radar_parts, REFERENCE_FRAME)
        lidar = synth.simulate_lidar_sweep(scene, t, seed=31, ground_extent=30.0)
        boxes = scene.boxes_at(idx)
        no_ground = supervision.remove_ground(
            lidar.points, supervision.GroundParams(seed=1))
        fg = supervision.extract_box_foreground(no_ground, boxes)
        pseudo, _ = supervision.make_pseudo_radar_fg(fg, validated, boxes, t)
        target = supervision.inject_foreground(validated, pseudo)
        bg = target.background
        for name in ("xyz", "rcs", "doppler", "sensor_id", "t"):
            assert np.array_equal(getattr(bg, name), getattr(validated, name)), name
        for box in boxes:
            m = points_in_box_mask(pseudo.xyz, box)
            if not m.any():
                continue
            rm = points_in_box_mask(validated.xyz, box)
            if rm.any():
                assert np.all(pseudo.rcs[m] == np.mean(validated.rcs[rm]))
                assert np.all(pseudo.doppler[m] == np.mean(validated.doppler[rm]))
            else:
                assert np.all(pseudo.rcs[m] == 0.0)
                assert np.all(pseudo.doppler[m] == 0.0)
    _report("supervision exactness",
            "background bit-identical; pseudo attributes equal recomputed means")


# 7 ----------------------------------------------------------------------------

def test_oracle_enhancer_end_to_end(tmp_path):
    out = tmp_path / "run"
    args = ["--out", str(out), "--seed", "13",
            "--set", "synth.duration=0.2", "--set", "window.seconds=0.1",
            "--set", "synth.objects=4", "--set", "synth.area=20",
            "pipeline", "--enhancer", "oracle"]
    assert cli_main(args) == 0
    scene = synth.Scene.load(out / "scene.json")
    spec = PipelineConfig.build(out_dir=out).grid_spec()
    half = spec.resolution / 2
    frames = []
    fg_categories = set()
    for idx in range(len(scene.timestamps)):
        name = f"f{idx:04d}"
        hyper_cloud, conf, src = io.read_hyper_csv(out / "hyper" / f"{name}.csv")
        target = io.read_point_csv(out / "target" / f"{name}.csv")
        mask = io.read_flags_csv(out / "target" / f"{name}.mask.csv")
        boxes = io.read_boxes_json(out / "boxes" / f"{name}.json")
        fg = target.xyz[mask]
        assert len(hyper_cloud) > 0
        # every hyper point sits within half a pixel of some target point
        for p in hyper_cloud.xyz[:, :2]:
            err = np.abs(target.xyz[:, :2] - p).max(axis=1).min()
            assert err <= half + 1e-12
        # and every (in-grid) foreground target point is recovered
        in_grid = ((fg[:, 0] >= spec.x_min) & (fg[:, 0] < spec.x_max)
                   & (fg[:, 1] >= spec.y_min) & (fg[:, 1] < spec.y_max))
        assert in_grid.all(), "scene construction must keep fg inside the grid"
        for p in fg[:, :2]:
            err = np.abs(hyper_cloud.xyz[:, :2] - p).max(axis=1).min()
            assert err <= half + 1e-12
        for box in boxes:
            if points_in_box_mask(fg, box).any():
                fg_categories.add(box.category)
        raw_parts = [align_to_reference(
            synth.simulate_sweep(scene, s.sensor_id, float(scene.timestamps[idx]),
                                 0.05, seed=13).points, s)
            for s in scene.sensors]
        raw = PointCloud.concat(raw_parts, REFERENCE_FRAME)
        frames.append((raw, HyperCloud(hyper_cloud, conf, src), boxes))
    assert fg_categories
    rows = metrics.fg_boost_report(frames, sorted(fg_categories))
    for row in rows:
        if row.category in fg_categories:
            assert row.added_avg > 0.0, f"no boost for {row.category}"
    _report("oracle-enhancer end-to-end",
            f"positions within res/2; boost > 0 for {sorted(fg_categories)}")


# 8 ----------------------------------------------------------------------------

def test_map_evaluator_sanity():
    gts = [metrics.Detection(f"f{f}", "car", (12.0 * i, 3.0 * f, 0.5),
                             (4.0, 2.0, 1.5), 0.0, 1.0)
           for f in range(4) for i in range(4)]
    cfg = metrics.DetEvalConfig()
    assert cfg.dist_thresholds == (0.5, 1.0, 2.0, 4.0)
    assert cfg.max_range == 50.0
    mean_ap, table = metrics.map_score(gts, gts, cfg)
    assert abs(mean_ap - 1.0) < 1e-6
    assert all(abs(ap - 1.0) < 1e-6 for ap in table.values())
    assert metrics.map_score([], gts, cfg)[0] == 0.0
    offset = [metrics.Detection(g.frame_id, g.category,
                                (g.center[0] + 5.0, g.center[1], g.center[2]),
                                g.size, g.yaw, 0.9) for g in gts]
    for d in cfg.dist_thresholds:
        assert metrics.average_precision(offset, gts, d, "car",
                                         cfg.max_range) == 0.0
    _report("mAP evaluator sanity",
            "GT->1.0000; empty->0; 5 m offset->0 at {0.5,1,2,4} m")


# 9 ----------------------------------------------------------------------------

def test_config_fidelity():
    d = load_defaults()
    assert float(d["window.seconds"]) == 0.5
    assert float(d["validation.tau_d"]) == 10.0
    assert float(d["validation.r"]) == 1.0
    assert int(d["validation.k_min"]) == 3
    assert int(d["grid.width"]) == 512 and int(d["grid.height"]) == 512
    assert float(d["grid.x_min"]) == -50.0 and float(d["grid.x_max"]) == 50.0
    assert float(d["grid.y_min"]) == -50.0 and float(d["grid.y_max"]) == 50.0
    assert int(d["threshold.intensity"]) == 60
    assert float(d["fov.rear_effective_deg"]) == 100.0
    cfg = PipelineConfig.build()
    assert cfg.window(0.5).sweep_count == 11
    assert cfg.validation_params() == ValidationParams(10.0, 1.0, 3, False)
    spec = cfg.grid_spec()
    assert (spec.width, spec.height) == (512, 512)
    assert spec.resolution == 0.1953125
    assert cfg.tau_int == 60
    rig = synth.default_sensor_rig(rear_effective_deg=cfg.rear_fov_effective_deg)
    assert sorted({s.fov_effective_deg for s in rig}) == [100.0, 120.0]
    _report("config fidelity",
            "window 0.5 s; tau_d 10, r 1, k 3; 512^2 over +-50 m; "
            "threshold 60; rear FoV 100 deg")


# 10 ---------------------------------------------------------------------------

def test_pipeline_determinism_and_runtime(tmp_path):
    """Two identical-seed runs of the 20-frame smoke pipeline produce
    hash-identical manifests, each under two minutes."""
    manifests = []
    args_tail = ["--set", "synth.duration=0.95", "--set", "synth.objects=4",
                 "pipeline"]
    for run_dir in (tmp_path / "a", tmp_path / "b"):
        t0 = time.perf_counter()
        assert cli_main(["--out", str(run_dir), "--seed", "99", *args_tail]) == 0
        elapsed = time.perf_counter() - t0
        assert elapsed < 120.0, f"pipeline took {elapsed:.1f} s"
        manifests.append((run_dir / "manifest.json").read_bytes())
    assert manifests[0] == manifests[1]
    doc = json.loads(manifests[0])
    hyper = [k for k in doc if k.startswith("hyper/")]
    assert len(hyper) == 20
    _report("pipeline determinism",
            f"20 frames, hash-identical manifests, {len(doc)} artifacts")
