"""Deterministic synthetic multi-radar world: labeled sweeps with known
true returns, multipath ghosts, and clutter, so every downstream stage has
a ground-truth oracle.

Trajectories are piecewise linear between sweep timestamps (piecewise
constant velocity). Surface points are sampled once per object in the box
frame, so a static object yields exactly coincident world points across
sweeps, which the accumulation stage relies on for its zero-noise
coincidence contract.

Doppler sign convention: positive = receding from the sensor.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (REFERENCE_FRAME, Box3D, PointCloud, RigidTransform,
                   SensorConfig, normalize_yaw, sensor_frame_id)

LABEL_TRUE = "true_return"
LABEL_GHOST = "ghost"
LABEL_CLUTTER = "clutter"
LABEL_GROUND = "ground"   # emitted by the lidar simulator only

LIDAR_SENSOR_ID = 100

_SURFACE_SALT = 101
_LIDAR_SALT = 102
_NOISE_SALT = 103
_ARTIFACT_SALT = 104
_GROUND_SALT = 105

MAX_OBJECT_SPEED = 60.0  # m/s, trajectory continuity bound


class SceneError(ValueError):
    pass


# size (l, w, h), surface density pts/m^2 on vertical faces, base RCS dBsm.
# Densities sit at radar-realistic sparsity (a handful of returns per object
# per sweep); the lidar simulator multiplies them by >= 10.
CATEGORY_SPECS: dict[str, tuple[tuple[float, float, float], float, float]] = {
    "car": ((4.5, 1.9, 1.6), 0.5, 12.0),
    "truck": ((8.0, 2.5, 3.2), 0.25, 22.0),
    "pedestrian": ((0.6, 0.6, 1.75), 1.0, 3.0),
    "traffic_cone": ((0.4, 0.4, 0.8), 2.0, 1.0),
}


@dataclass(frozen=True)
class ObjectTrack:
    """One object's box trajectory, sampled at every sweep timestamp."""

    id: int
    category: str
    size: tuple[float, float, float]
    surface_density: float
    base_rcs: float
    centers: np.ndarray     # (T, 3)
    yaws: np.ndarray        # (T,)
    velocities: np.ndarray  # (T, 2) BEV, right-derivative of centers

    def box_at(self, index: int) -> Box3D:
        return Box3D(self.centers[index], self.size, float(self.yaws[index]),
                     self.category, self.velocities[index], self.id)

    def center_at(self, t: float, frame_rate: float) -> np.ndarray:
        i, s = _segment(t, frame_rate, self.centers.shape[0])
        return self.centers[i] + s * (self.centers[i + 1] - self.centers[i]) \
            if s > 0.0 else self.centers[i].copy()

    def yaw_at(self, t: float, frame_rate: float) -> float:
        i, s = _segment(t, frame_rate, self.yaws.shape[0])
        if s == 0.0:
            return float(self.yaws[i])
        return float(self.yaws[i] + s * normalize_yaw(self.yaws[i + 1] - self.yaws[i]))


def _segment(t: float, frame_rate: float, n: int) -> tuple[int, float]:
    """Piecewise-linear segment index and fractional position for time t."""
    if n == 1:
        return 0, 0.0
    u = t * frame_rate
    i = int(np.floor(u))
    i = min(max(i, 0), n - 2)
    return i, float(u - i)


def _right_derivative(values: np.ndarray, frame_rate: float) -> np.ndarray:
    """Per-keyframe derivative of a piecewise-linear track (right-sided;
    the last keyframe reuses the final segment)."""
    n = values.shape[0]
    if n == 1:
        return np.zeros_like(values)
    d = np.empty_like(values)
    d[:-1] = (values[1:] - values[:-1]) * frame_rate
    d[-1] = d[-2]
    return d


def _yaw_rate(yaws: np.ndarray, frame_rate: float) -> np.ndarray:
    n = yaws.shape[0]
    if n == 1:
        return np.zeros_like(yaws)
    deltas = np.array([normalize_yaw(yaws[i + 1] - yaws[i]) for i in range(n - 1)])
    d = np.empty_like(yaws)
    d[:-1] = deltas * frame_rate
    d[-1] = d[-2]
    return d


@dataclass(frozen=True)
class Scene:
    """Synthetic world: sensor rig, ego trajectory, object tracks.

    Ego poses map the moving reference frame into the world frame and are
    yaw-only rotations (the piecewise-linear pose interpolation depends on
    it; the JSON loader rejects anything else).
    """

    sensors: list[SensorConfig]
    ego_centers: np.ndarray  # (T, 3)
    ego_yaws: np.ndarray     # (T,)
    objects: list[ObjectTrack]
    duration: float
    frame_rate: float

    @property
    def timestamps(self) -> np.ndarray:
        n = int(round(self.duration * self.frame_rate)) + 1
        return np.arange(n) / self.frame_rate

    def frame_index(self, t: float) -> int:
        i = int(round(t * self.frame_rate))
        ts = self.timestamps
        if i < 0 or i >= ts.shape[0] or ts[i] != t:
            raise SceneError(f"t={t!r} is not a scene timestamp")
        return i

    def ego_pose(self, t: float) -> RigidTransform:
        i = self.frame_index(t)
        return RigidTransform.rot_z(float(self.ego_yaws[i]), self.ego_centers[i])

    @property
    def ego_poses(self) -> dict[float, RigidTransform]:
        return {float(t): self.ego_pose(float(t)) for t in self.timestamps}

    def ego_pose_at(self, t: float) -> RigidTransform:
        """Piecewise-linear interpolation, for continuous-time oracles."""
        i, s = _segment(t, self.frame_rate, self.ego_centers.shape[0])
        c = self.ego_centers[i] + s * (self.ego_centers[i + 1] - self.ego_centers[i]) \
            if s > 0.0 else self.ego_centers[i]
        yaw = self.ego_yaws[i]
        if s > 0.0:
            yaw = yaw + s * normalize_yaw(self.ego_yaws[i + 1] - self.ego_yaws[i])
        return RigidTransform.rot_z(float(yaw), c)

    def sensor_pose_at(self, sensor_id: int, t: float) -> RigidTransform:
        return self.ego_pose_at(t).compose(self.sensor(sensor_id).extrinsic)

    def sensor(self, sensor_id: int) -> SensorConfig:
        for s in self.sensors:
            if s.sensor_id == sensor_id:
                return s
        raise SceneError(f"unknown sensor_id {sensor_id}")

    def boxes_at(self, index: int) -> list[Box3D]:
        return [obj.box_at(index) for obj in self.objects]

    def validate(self) -> None:
        dt = 1.0 / self.frame_rate
        n = self.timestamps.shape[0]
        if self.ego_centers.shape[0] != n or self.ego_yaws.shape[0] != n:
            raise SceneError("ego trajectory must cover every sweep timestamp")
        for obj in self.objects:
            if obj.centers.shape[0] != n:
                raise SceneError(f"object {obj.id} trajectory must cover every timestamp")
            step = np.linalg.norm(np.diff(obj.centers, axis=0), axis=1)
            if step.size and step.max() >= MAX_OBJECT_SPEED * dt:
                raise SceneError(f"object {obj.id} trajectory discontinuous "
                                 f"(step {step.max():.2f} m exceeds "
                                 f"{MAX_OBJECT_SPEED * dt:.2f} m)")

    # --- serialization ---------------------------------------------------

    def to_json(self) -> str:
        ts = self.timestamps
        doc = {
            "frame_rate": self.frame_rate,
            "duration": self.duration,
            "sensors": [{
                "sensor_id": s.sensor_id,
                "extrinsic": [float(v) for v in s.extrinsic.to_matrix().reshape(-1)],
                "fov_deg": s.fov_deg,
                "fov_effective_deg": s.fov_effective_deg,
                "max_range": s.max_range,
            } for s in self.sensors],
            "ego_poses": {str(float(ts[i])): {
                "center": [float(v) for v in self.ego_centers[i]],
                "yaw": float(self.ego_yaws[i]),
            } for i in range(ts.shape[0])},
            "objects": [{
                "id": o.id,
                "category": o.category,
                "size": list(o.size),
                "surface_density": o.surface_density,
                "base_rcs": o.base_rcs,
                "states": {str(float(ts[i])): {
                    "center": [float(v) for v in o.centers[i]],
                    "yaw": float(o.yaws[i]),
                    "velocity": [float(v) for v in o.velocities[i]],
                } for i in range(ts.shape[0])},
            } for o in self.objects],
        }
        return json.dumps(doc, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @staticmethod
    def from_json(text: str) -> "Scene":
        doc = json.loads(text)
        frame_rate = float(doc["frame_rate"])
        duration = float(doc["duration"])
        n = int(round(duration * frame_rate)) + 1
        ts = np.arange(n) / frame_rate
        sensors = [SensorConfig(int(s["sensor_id"]),
                                RigidTransform.from_matrix(np.array(s["extrinsic"]).reshape(4, 4)),
                                float(s["fov_deg"]), float(s["fov_effective_deg"]),
                                float(s["max_range"]))
                   for s in doc["sensors"]]
        ego_centers = np.zeros((n, 3))
        ego_yaws = np.zeros(n)
        for i, t in enumerate(ts):
            key = str(float(t))
            if key not in doc["ego_poses"]:
                raise SceneError(f"ego pose missing for timestamp {key}")
            pose = doc["ego_poses"][key]
            ego_centers[i] = pose["center"]
            ego_yaws[i] = pose["yaw"]
        objects = []
        for o in doc["objects"]:
            centers = np.zeros((n, 3))
            yaws = np.zeros(n)
            vels = np.zeros((n, 2))
            for i, t in enumerate(ts):
                st = o["states"][str(float(t))]
                centers[i] = st["center"]
                yaws[i] = st["yaw"]
                vels[i] = st["velocity"]
            objects.append(ObjectTrack(int(o["id"]), o["category"],
                                       tuple(o["size"]), float(o["surface_density"]),
                                       float(o["base_rcs"]), centers, yaws, vels))
        scene = Scene(sensors, ego_centers, ego_yaws, objects, duration, frame_rate)
        scene.validate()
        return scene

    @staticmethod
    def load(path: str | Path) -> "Scene":
        return Scene.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class LabeledSweep:
    """A sweep plus the per-point ground-truth tags the simulator knows."""

    points: PointCloud
    labels: np.ndarray      # (n,) str
    object_ids: np.ndarray  # (n,) int64, -1 unless a true return

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype="<U12")
        oids = np.asarray(self.object_ids, dtype=np.int64)
        if labels.shape[0] != len(self.points) or oids.shape[0] != len(self.points):
            raise ValueError("labels must align with the point cloud")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "object_ids", oids)

    def subset(self, index: np.ndarray) -> "LabeledSweep":
        return LabeledSweep(self.points.subset(index), self.labels[index],
                            self.object_ids[index])


def default_sensor_rig(radius: float = 2.5, height: float = 0.8,
                       max_range: float = 60.0,
                       rear_effective_deg: float = 100.0) -> list[SensorConfig]:
    """Six surround radars at 60 deg spacing, 120 deg FoV each; the two
    rear-facing units (boresights at 120 and 240 deg) run with a trimmed
    effective FoV to dodge self-occlusion off the vehicle body."""
    rig = []
    for i in range(6):
        yaw = np.deg2rad(60.0 * i)
        pos = np.array([radius * np.cos(yaw), radius * np.sin(yaw), height])
        effective = rear_effective_deg if i in (2, 4) else 120.0
        rig.append(SensorConfig(i, RigidTransform.rot_z(float(yaw), pos),
                                120.0, effective, max_range))
    return rig


@dataclass
class SceneGenConfig:
    duration: float = 1.0
    frame_rate: float = 20.0
    n_objects: int = 4
    area: float = 35.0                 # object placement extent, +-m in x and y
    ego_speed_max: float = 8.0
    object_speed_max: float = 10.0
    categories: tuple[str, ...] = ("car", "truck", "pedestrian")
    sensors: list[SensorConfig] | None = None
    placement_retries: int = 200
    segment_seconds: float = 0.5       # ego velocity resample interval


def generate_scene(config: SceneGenConfig, seed: int) -> Scene:
    """Deterministic scene for (config, seed); raises SceneError naming the
    colliding object when placement keeps failing."""
    if config.n_objects < 0 or config.duration < 0:
        raise SceneError("invalid generator config")
    rng = np.random.default_rng(seed)
    n = int(round(config.duration * config.frame_rate)) + 1
    dt = 1.0 / config.frame_rate
    sensors = config.sensors if config.sensors is not None else default_sensor_rig()
    if not sensors:
        raise SceneError("at least one sensor required")

    # ego: piecewise-constant velocity, resampled every segment
    seg_frames = max(1, int(round(config.segment_seconds * config.frame_rate)))
    ego_centers = np.zeros((n, 3))
    ego_yaws = np.zeros(n)
    speed = rng.uniform(0.0, config.ego_speed_max)
    yaw_rate = rng.uniform(-0.2, 0.2)
    for i in range(1, n):
        if (i - 1) % seg_frames == 0 and i > 1:
            speed = rng.uniform(0.0, config.ego_speed_max)
            yaw_rate = rng.uniform(-0.2, 0.2)
        yaw = ego_yaws[i - 1]
        ego_centers[i] = ego_centers[i - 1] + dt * speed * np.array(
            [np.cos(yaw), np.sin(yaw), 0.0])
        ego_yaws[i] = yaw + dt * yaw_rate

    # objects: constant velocity, constant yaw, non-overlapping at t=0
    objects: list[ObjectTrack] = []
    placed: list[tuple[np.ndarray, float]] = []  # (center, bev radius)
    for k in range(config.n_objects):
        cat = config.categories[int(rng.integers(len(config.categories)))]
        size, density, rcs = CATEGORY_SPECS[cat]
        radius = 0.5 * float(np.hypot(size[0], size[1]))
        for attempt in range(config.placement_retries + 1):
            c0 = np.array([rng.uniform(-config.area, config.area),
                           rng.uniform(-config.area, config.area),
                           size[2] / 2.0])
            collider = -1
            for j, (pc, pr) in enumerate(placed):
                if np.linalg.norm(c0[:2] - pc[:2]) < radius + pr:
                    collider = objects[j].id
                    break
            if collider < 0:
                break
        else:
            raise SceneError(f"could not place object {k} without overlapping "
                             f"object {collider} after {config.placement_retries} retries")
        yaw = rng.uniform(-np.pi, np.pi)
        spd = rng.uniform(0.0, config.object_speed_max)
        heading = rng.uniform(-np.pi, np.pi)
        vel = spd * np.array([np.cos(heading), np.sin(heading)])
        centers = c0[None, :] + np.arange(n)[:, None] * dt * np.array([vel[0], vel[1], 0.0])
        yaws = np.full(n, yaw)
        vels = np.tile(vel, (n, 1))
        objects.append(ObjectTrack(k, cat, size, density, rcs, centers, yaws, vels))
        placed.append((c0, radius))

    scene = Scene(list(sensors), ego_centers, ego_yaws, objects,
                  config.duration, config.frame_rate)
    scene.validate()
    return scene


def _surface_points_local(obj: ObjectTrack, rng: np.random.Generator,
                          density_scale: float = 1.0) -> np.ndarray:
    """Fixed per-object surface samples on the four vertical faces, uniform
    by area, in the box frame."""
    l, w, h = obj.size
    pts = []
    # (face area, builder) in a fixed order so the rng stream is stable
    faces = [
        (w * h, lambda u, v: np.column_stack([np.full_like(u, l / 2), u, v])),
        (w * h, lambda u, v: np.column_stack([np.full_like(u, -l / 2), u, v])),
        (l * h, lambda u, v: np.column_stack([u, np.full_like(u, w / 2), v])),
        (l * h, lambda u, v: np.column_stack([u, np.full_like(u, -w / 2), v])),
    ]
    half = [w / 2, w / 2, l / 2, l / 2]
    for (area, build), hu in zip(faces, half):
        cnt = int(round(obj.surface_density * density_scale * area))
        u = rng.uniform(-hu, hu, cnt)
        v = rng.uniform(-h / 2, h / 2, cnt)
        pts.append(build(u, v))
    if not pts:
        return np.zeros((0, 3))
    return np.concatenate(pts)


def _rotz(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _object_world_points(scene: Scene, obj: ObjectTrack, index: int,
                         local: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World positions and velocities of an object's surface samples at a
    sweep index. Velocity = center velocity + yaw-rate cross term."""
    yaw = float(obj.yaws[index])
    rot = _rotz(yaw)
    arm = local @ rot.T
    pos = obj.centers[index] + arm
    wz = float(_yaw_rate(obj.yaws, scene.frame_rate)[index])
    v_center = _right_derivative(obj.centers, scene.frame_rate)[index]
    vel = np.tile(v_center, (local.shape[0], 1))
    vel[:, 0] += -wz * arm[:, 1]
    vel[:, 1] += wz * arm[:, 0]
    return pos, vel


def _sensor_world_state(scene: Scene, sensor_id: int, index: int) -> tuple[RigidTransform, np.ndarray]:
    """Sensor->world pose and the world velocity of the sensor origin."""
    t = float(scene.timestamps[index])
    ego = scene.ego_pose(t)
    sensor = scene.sensor(sensor_id)
    pose = ego.compose(sensor.extrinsic)
    v_ego = _right_derivative(scene.ego_centers, scene.frame_rate)[index]
    wz = float(_yaw_rate(scene.ego_yaws, scene.frame_rate)[index])
    arm = ego.rotation @ sensor.extrinsic.translation
    vel = v_ego + np.array([-wz * arm[1], wz * arm[0], 0.0])
    return pose, vel


def frustum_mask(xyz_sensor: np.ndarray, sensor: SensorConfig) -> np.ndarray:
    """Inside the sensor frustum: azimuth within the effective FoV and
    range within max_range (both inclusive)."""
    rng = np.linalg.norm(xyz_sensor, axis=1)
    az = np.arctan2(xyz_sensor[:, 1], xyz_sensor[:, 0])
    half = np.deg2rad(sensor.fov_effective_deg) / 2.0
    return (rng <= sensor.max_range) & (np.abs(az) <= half)


def simulate_sweep(scene: Scene, sensor_id: int, t: float,
                   noise_sigma_xyz: float = 0.0, seed: int = 0,
                   noise_sigma_doppler: float | None = None) -> LabeledSweep:
    """One radar sweep in the sensor frame; every point is a true return.

    Doppler is the relative radial velocity of the surface point w.r.t. the
    sensor (positive receding), plus Gaussian noise. When not given,
    noise_sigma_doppler defaults to noise_sigma_xyz.
    """
    index = scene.frame_index(t)
    sensor = scene.sensor(sensor_id)
    if noise_sigma_doppler is None:
        noise_sigma_doppler = noise_sigma_xyz
    pose, v_sensor = _sensor_world_state(scene, sensor_id, index)
    inv = pose.inverse()
    noise_rng = np.random.default_rng([seed, _NOISE_SALT, sensor_id, index])

    xyz_parts, dop_parts, rcs_parts, oid_parts = [], [], [], []
    for obj in scene.objects:
        srng = np.random.default_rng([seed, _SURFACE_SALT, obj.id])
        local = _surface_points_local(obj, srng)
        if local.shape[0] == 0:
            continue
        pos_w, vel_w = _object_world_points(scene, obj, index, local)
        pos_s = inv.apply(pos_w)
        vis = frustum_mask(pos_s, sensor)
        if not vis.any():
            continue
        pos_w, vel_w, pos_s = pos_w[vis], vel_w[vis], pos_s[vis]
        los = pos_w - pose.translation
        rng_norm = np.linalg.norm(los, axis=1)
        u = los / rng_norm[:, None]
        doppler = np.einsum("ij,ij->i", u, vel_w - v_sensor)
        if noise_sigma_xyz > 0.0:
            pos_s = pos_s + noise_rng.normal(0.0, noise_sigma_xyz, pos_s.shape)
        if noise_sigma_doppler > 0.0:
            doppler = doppler + noise_rng.normal(0.0, noise_sigma_doppler, doppler.shape)
        keep = frustum_mask(pos_s, sensor)  # noise may push points out
        xyz_parts.append(pos_s[keep])
        dop_parts.append(doppler[keep])
        rcs_parts.append(np.full(int(keep.sum()), obj.base_rcs))
        oid_parts.append(np.full(int(keep.sum()), obj.id, dtype=np.int64))

    frame = sensor_frame_id(sensor_id)
    if not xyz_parts:
        return LabeledSweep(PointCloud.empty(frame), np.zeros(0, "<U12"),
                            np.zeros(0, np.int64))
    xyz = np.concatenate(xyz_parts)
    n = xyz.shape[0]
    cloud = PointCloud(xyz, np.concatenate(rcs_parts), np.concatenate(dop_parts),
                       np.full(n, sensor_id, np.int64), np.full(n, t), frame)
    return LabeledSweep(cloud, np.full(n, LABEL_TRUE, "<U12"),
                        np.concatenate(oid_parts))


def simulate_lidar_sweep(scene: Scene, t: float, seed: int = 0,
                         density_scale: float = 10.0, max_range: float = 60.0,
                         ground_density: float = 0.5,
                         ground_extent: float = 50.0) -> LabeledSweep:
    """Synthetic lidar: object surfaces at `density_scale` times the radar
    density plus a flat ground plane at world z=0, in the reference frame."""
    index = scene.frame_index(t)
    ego = scene.ego_pose(t)
    inv = ego.inverse()
    v_ego = _right_derivative(scene.ego_centers, scene.frame_rate)[index]

    xyz_parts, dop_parts, rcs_parts, oid_parts, lab_parts = [], [], [], [], []
    for obj in scene.objects:
        srng = np.random.default_rng([seed, _LIDAR_SALT, obj.id])
        local = _surface_points_local(obj, srng, density_scale)
        if local.shape[0] == 0:
            continue
        pos_w, vel_w = _object_world_points(scene, obj, index, local)
        pos_r = inv.apply(pos_w)
        vis = np.linalg.norm(pos_r, axis=1) <= max_range
        if not vis.any():
            continue
        pos_w, vel_w, pos_r = pos_w[vis], vel_w[vis], pos_r[vis]
        los = pos_w - ego.translation
        dist = np.linalg.norm(los, axis=1)
        dist[dist == 0.0] = 1.0
        doppler = np.einsum("ij,ij->i", los / dist[:, None], vel_w - v_ego)
        xyz_parts.append(pos_r)
        dop_parts.append(doppler)
        rcs_parts.append(np.full(pos_r.shape[0], obj.base_rcs))
        oid_parts.append(np.full(pos_r.shape[0], obj.id, dtype=np.int64))
        lab_parts.append(np.full(pos_r.shape[0], LABEL_TRUE, "<U12"))

    grng = np.random.default_rng([seed, _GROUND_SALT, index])
    n_ground = int(round(ground_density * (2.0 * ground_extent) ** 2))
    if n_ground > 0:
        gx = grng.uniform(-ground_extent, ground_extent, n_ground)
        gy = grng.uniform(-ground_extent, ground_extent, n_ground)
        ground_w = np.column_stack([gx + ego.translation[0],
                                    gy + ego.translation[1],
                                    np.zeros(n_ground)])
        ground_r = inv.apply(ground_w)
        vis = np.linalg.norm(ground_r, axis=1) <= max_range
        ground_w, ground_r = ground_w[vis], ground_r[vis]
        los = ground_w - ego.translation
        dist = np.linalg.norm(los, axis=1)
        dist[dist == 0.0] = 1.0
        doppler = np.einsum("ij,ij->i", los / dist[:, None],
                            np.tile(-v_ego, (ground_r.shape[0], 1)))
        xyz_parts.append(ground_r)
        dop_parts.append(doppler)
        rcs_parts.append(np.zeros(ground_r.shape[0]))
        oid_parts.append(np.full(ground_r.shape[0], -1, dtype=np.int64))
        lab_parts.append(np.full(ground_r.shape[0], LABEL_GROUND, "<U12"))

    if not xyz_parts:
        return LabeledSweep(PointCloud.empty(REFERENCE_FRAME),
                            np.zeros(0, "<U12"), np.zeros(0, np.int64))
    xyz = np.concatenate(xyz_parts)
    n = xyz.shape[0]
    cloud = PointCloud(xyz, np.concatenate(rcs_parts), np.concatenate(dop_parts),
                       np.full(n, LIDAR_SENSOR_ID, np.int64), np.full(n, t),
                       REFERENCE_FRAME)
    return LabeledSweep(cloud, np.concatenate(lab_parts), np.concatenate(oid_parts))


class ArtifactError(RuntimeError):
    pass


def _mirror(points: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    n = np.asarray(normal, dtype=np.float64)
    n = n / np.linalg.norm(n)
    d = points @ n - offset
    return points - 2.0 * d[:, None] * n


def inject_artifacts(sweep: LabeledSweep, sensor: SensorConfig,
                     ghost_count: int, clutter_count: int,
                     reflector_planes: list[tuple[np.ndarray, float]],
                     seed: int = 0, min_separation: float = 2.0,
                     max_tries: int = 200) -> LabeledSweep:
    """Append multipath ghosts and isolated clutter to a single sweep.

    Ghosts mirror randomly chosen true returns across a reflector plane
    (given as (normal, offset) in the sensor frame, plane = {x : n.x = d});
    they exist only in this sweep, so they are single-view by construction.
    Both artifact kinds are kept at least `min_separation` from every true
    return and from each other, which pins down the denoising acceptance
    behavior (a 2 m exclusion cannot pass a 1 m self-consistency radius).
    """
    if ghost_count > 0 and not reflector_planes:
        raise ArtifactError("ghost injection requires at least one reflector plane")
    cloud = sweep.points
    true_mask = sweep.labels == LABEL_TRUE
    true_xyz = cloud.xyz[true_mask]
    rng = np.random.default_rng([seed, _ARTIFACT_SALT])

    def isolated(p: np.ndarray, extra: list[np.ndarray]) -> bool:
        for ref in (true_xyz, *[np.asarray(e).reshape(1, 3) for e in extra]):
            if ref.shape[0] and np.min(np.linalg.norm(ref - p, axis=1)) < min_separation:
                return False
        return True

    placed: list[np.ndarray] = []
    ghosts = []
    if ghost_count > 0 and true_xyz.shape[0] == 0:
        raise ArtifactError("cannot mirror ghosts: sweep has no true returns")
    for _ in range(ghost_count):
        for attempt in range(max_tries):
            src = int(rng.integers(true_xyz.shape[0]))
            plane = reflector_planes[int(rng.integers(len(reflector_planes)))]
            p = _mirror(true_xyz[src:src + 1], plane[0], plane[1])[0]
            if frustum_mask(p[None, :], sensor)[0] and isolated(p, placed):
                break
        else:
            raise ArtifactError(f"ghost placement failed after {max_tries} tries")
        placed.append(p)
        src_global = int(np.flatnonzero(true_mask)[src])
        ghosts.append((p, float(cloud.rcs[src_global]), float(cloud.doppler[src_global])))

    clutters = []
    half = np.deg2rad(sensor.fov_effective_deg) / 2.0
    for _ in range(clutter_count):
        for attempt in range(max_tries):
            az = rng.uniform(-half, half)
            rr = sensor.max_range * np.sqrt(rng.uniform())
            z = rng.uniform(0.0, 3.0)
            p = np.array([rr * np.cos(az), rr * np.sin(az), z])
            if frustum_mask(p[None, :], sensor)[0] and isolated(p, placed):
                break
        else:
            raise ArtifactError(f"clutter placement failed after {max_tries} tries")
        placed.append(p)
        clutters.append((p, float(rng.uniform(0.0, 15.0)), float(rng.normal(0.0, 1.0))))

    if not ghosts and not clutters:
        return sweep

    t_val = float(cloud.t[0]) if len(cloud) else 0.0
    add_xyz = np.array([g[0] for g in ghosts] + [c[0] for c in clutters])
    add_rcs = np.array([g[1] for g in ghosts] + [c[1] for c in clutters])
    add_dop = np.array([g[2] for g in ghosts] + [c[2] for c in clutters])
    nadd = add_xyz.shape[0]
    added = PointCloud(add_xyz, add_rcs, add_dop,
                       np.full(nadd, sensor.sensor_id, np.int64),
                       np.full(nadd, t_val), cloud.frame_id)
    labels = np.concatenate([sweep.labels,
                             np.full(len(ghosts), LABEL_GHOST, "<U12"),
                             np.full(len(clutters), LABEL_CLUTTER, "<U12")])
    oids = np.concatenate([sweep.object_ids, np.full(nadd, -1, dtype=np.int64)])
    return LabeledSweep(PointCloud.concat([cloud, added]), labels, oids)
