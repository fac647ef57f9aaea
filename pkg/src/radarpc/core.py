"""Domain types shared by every pipeline stage: radar points, SE(3) rigid
transforms, and yaw-oriented 3D boxes.

All types are immutable after construction (arrays are frozen read-only),
so instances can be shared freely across threads and processes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

ROT_ORTHO_TOL = 1e-9

# Reserved sensor_id values for points that were not measured by a physical
# radar: pseudo-radar foreground (supervision targets) and lifted points.
PSEUDO_SENSOR_ID = -1
LIFTED_SENSOR_ID = -2


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class RadarPoint:
    """A single 4D radar return: position, reflectivity, radial velocity."""

    x: float
    y: float
    z: float
    rcs: float          # dBsm
    doppler: float      # m/s, positive = receding from the sensor
    sensor_id: int
    t: float            # sweep timestamp, seconds


@dataclass(frozen=True)
class PointCloud:
    """Ordered multiset of radar points in a single reference frame.

    Stored column-wise (structure of arrays) so the hot kernels can run on
    contiguous buffers. Duplicate coordinates are allowed; accumulation is
    a multiset union.
    """

    xyz: np.ndarray        # (n, 3) float64
    rcs: np.ndarray        # (n,)  float64
    doppler: np.ndarray    # (n,)  float64
    sensor_id: np.ndarray  # (n,)  int64
    t: np.ndarray          # (n,)  float64
    frame_id: str

    def __post_init__(self) -> None:
        n = self.xyz.shape[0] if self.xyz.ndim == 2 else 0
        xyz = np.asarray(self.xyz, dtype=np.float64).reshape(n, 3)
        object.__setattr__(self, "xyz", _frozen(xyz))
        for name, dtype in (("rcs", np.float64), ("doppler", np.float64),
                            ("sensor_id", np.int64), ("t", np.float64)):
            col = np.asarray(getattr(self, name), dtype=dtype).reshape(n)
            object.__setattr__(self, name, _frozen(col))

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def point(self, i: int) -> RadarPoint:
        x, y, z = self.xyz[i]
        return RadarPoint(float(x), float(y), float(z), float(self.rcs[i]),
                          float(self.doppler[i]), int(self.sensor_id[i]),
                          float(self.t[i]))

    def subset(self, index: np.ndarray) -> "PointCloud":
        """Select rows by boolean mask or integer index array (order kept)."""
        return PointCloud(self.xyz[index], self.rcs[index],
                          self.doppler[index], self.sensor_id[index],
                          self.t[index], self.frame_id)

    def with_frame(self, frame_id: str) -> "PointCloud":
        return replace(self, frame_id=frame_id)

    @staticmethod
    def empty(frame_id: str) -> "PointCloud":
        z = np.zeros(0)
        return PointCloud(np.zeros((0, 3)), z, z, np.zeros(0, np.int64), z, frame_id)

    @staticmethod
    def from_points(points: Iterable[RadarPoint], frame_id: str) -> "PointCloud":
        pts = list(points)
        if not pts:
            return PointCloud.empty(frame_id)
        xyz = np.array([[p.x, p.y, p.z] for p in pts])
        return PointCloud(xyz,
                          np.array([p.rcs for p in pts]),
                          np.array([p.doppler for p in pts]),
                          np.array([p.sensor_id for p in pts], np.int64),
                          np.array([p.t for p in pts]),
                          frame_id)

    @staticmethod
    def concat(clouds: Sequence["PointCloud"], frame_id: str | None = None) -> "PointCloud":
        if not clouds:
            raise ValueError("concat needs at least one cloud")
        fid = clouds[0].frame_id if frame_id is None else frame_id
        return PointCloud(np.concatenate([c.xyz for c in clouds]),
                          np.concatenate([c.rcs for c in clouds]),
                          np.concatenate([c.doppler for c in clouds]),
                          np.concatenate([c.sensor_id for c in clouds]),
                          np.concatenate([c.t for c in clouds]),
                          fid)


@dataclass(frozen=True)
class RigidTransform:
    """SE(3) transform as rotation + translation.

    Kept in factored form (not a 4x4 matrix) so orthonormality is directly
    checkable: R Rᵀ = I and det R = +1 within ROT_ORTHO_TOL, enforced at
    construction.
    """

    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(rot @ rot.T - np.eye(3)).max()
        if err > ROT_ORTHO_TOL:
            raise ValueError(f"rotation not orthonormal (max |R Rᵀ - I| = {err:.3e})")
        if abs(np.linalg.det(rot) - 1.0) > ROT_ORTHO_TOL:
            raise ValueError("rotation determinant is not +1 (improper rotation)")
        object.__setattr__(self, "rotation", _frozen(rot))
        object.__setattr__(self, "translation", _frozen(tr))

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def rot_z(yaw: float, translation: Sequence[float] = (0.0, 0.0, 0.0)) -> "RigidTransform":
        c, s = np.cos(yaw), np.sin(yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        return RigidTransform(rot, np.asarray(translation, dtype=np.float64))

    @staticmethod
    def from_matrix(m: np.ndarray) -> "RigidTransform":
        m = np.asarray(m, dtype=np.float64).reshape(4, 4)
        if np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])).max() > 1e-12:
            raise ValueError("last row of a homogeneous transform must be [0,0,0,1]")
        return RigidTransform(m[:3, :3], m[:3, 3])

    def to_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        """Map (n, 3) or (3,) points: rotate, then translate."""
        pts = np.asarray(xyz, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: apply `other` first, then `self`."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        rot_t = self.rotation.T
        return RigidTransform(rot_t, -(rot_t @ self.translation))


def compose(t1: RigidTransform, t2: RigidTransform) -> RigidTransform:
    return t1.compose(t2)


def invert(t: RigidTransform) -> RigidTransform:
    return t.inverse()


def apply_transform(t: RigidTransform, cloud: PointCloud,
                    frame_id: str | None = None) -> PointCloud:
    """Map every point position by `t`; attributes are untouched.

    Raises ValueError naming the first offending point index when the cloud
    contains non-finite coordinates.
    """
    finite = np.isfinite(cloud.xyz).all(axis=1)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise ValueError(f"non-finite coordinates at point index {bad}")
    fid = cloud.frame_id if frame_id is None else frame_id
    return PointCloud(t.apply(cloud.xyz), cloud.rcs, cloud.doppler,
                      cloud.sensor_id, cloud.t, fid)


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    y = float((-yaw + np.pi) % (2.0 * np.pi))
    return np.pi - y


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: yaw about +z only (no roll/pitch).

    This matches the BEV center-distance evaluation protocol; full 3D
    orientation is a documented non-goal.
    """

    center: np.ndarray                     # (3,)
    size: tuple[float, float, float]       # length (x), width (y), height (z)
    yaw: float
    category: str
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))  # (2,) BEV m/s
    id: int = -1

    def __post_init__(self) -> None:
        object.__setattr__(self, "center",
                           _frozen(np.asarray(self.center, dtype=np.float64).reshape(3)))
        object.__setattr__(self, "velocity",
                           _frozen(np.asarray(self.velocity, dtype=np.float64).reshape(2)))
        size = tuple(float(v) for v in self.size)
        if len(size) != 3 or min(size) <= 0.0:
            raise ValueError(f"box size must be three strictly positive extents, got {size}")
        object.__setattr__(self, "size", size)
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))

    def corners_bev(self) -> np.ndarray:
        """(4, 2) BEV footprint corners, counter-clockwise."""
        l, w, _ = self.size
        local = np.array([[l, w], [-l, w], [-l, -w], [l, -w]]) * 0.5
        c, s = np.cos(self.yaw), np.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.center[:2]


def points_in_box_mask(xyz: np.ndarray, box: Box3D) -> np.ndarray:
    """Boolean mask of points inside `box` (boundary counts as inside)."""
    pts = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    d = pts - box.center
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    # rotate by -yaw into the box frame
    bx = c * d[:, 0] + s * d[:, 1]
    by = -s * d[:, 0] + c * d[:, 1]
    l, w, h = box.size
    return ((np.abs(bx) <= l / 2.0) & (np.abs(by) <= w / 2.0)
            & (np.abs(d[:, 2]) <= h / 2.0))


def point_in_box(p: Sequence[float], box: Box3D) -> bool:
    return bool(points_in_box_mask(np.asarray(p, dtype=np.float64).reshape(1, 3), box)[0])


@dataclass(frozen=True)
class SensorConfig:
    """Mounting and field-of-view description of one radar."""

    sensor_id: int
    extrinsic: RigidTransform   # sensor frame -> reference frame
    fov_deg: float              # physical azimuth FoV, centred on sensor +x
    fov_effective_deg: float    # trimmed FoV actually used (<= fov_deg)
    max_range: float

    def __post_init__(self) -> None:
        if not (0.0 < self.fov_deg <= 360.0):
            raise ValueError("fov_deg must be in (0, 360]")
        if self.fov_effective_deg > self.fov_deg:
            raise ValueError("fov_effective_deg must not exceed fov_deg")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")


def sensor_frame_id(sensor_id: int) -> str:
    return f"sensor{sensor_id}"


REFERENCE_FRAME = "reference"
