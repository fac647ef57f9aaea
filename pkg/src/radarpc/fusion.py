"""Spatial alignment into the shared reference frame and ego-motion
compensated accumulation over a sliding window.

Positions are compensated; Doppler values are not (they stay relative to
the sensor that measured them), so downstream users must not read them as
world-frame radial velocities.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import (REFERENCE_FRAME, PointCloud, RigidTransform, SensorConfig,
                   apply_transform, sensor_frame_id)


class FrameMismatchError(ValueError):
    pass


class MissingPoseError(KeyError):
    def __init__(self, tau: float):
        super().__init__(f"no ego pose for sweep time tau={tau!r}")
        self.tau = tau


@dataclass(frozen=True)
class WindowSpec:
    """Accumulation window: `past_count` sweeps before the keyframe plus
    the keyframe itself."""

    window_seconds: float
    frame_rate: float
    keyframe_t: float

    def __post_init__(self) -> None:
        if self.window_seconds < 0.0 or self.frame_rate <= 0.0:
            raise ValueError("window_seconds must be >= 0 and frame_rate > 0")
        i0 = round(self.keyframe_t * self.frame_rate)
        if abs(i0 / self.frame_rate - self.keyframe_t) > 1e-9:
            raise ValueError(f"keyframe_t={self.keyframe_t!r} is not on the frame grid")

    @property
    def past_count(self) -> int:
        return int(round(self.window_seconds * self.frame_rate))

    @property
    def sweep_count(self) -> int:
        return self.past_count + 1

    def timestamps(self, clip_start: float = 0.0) -> list[float]:
        """Sweep times oldest-first, truncated at `clip_start` (sweeps from
        before the recording simply do not exist)."""
        i0 = int(round(self.keyframe_t * self.frame_rate))
        taus = [(i0 - self.past_count + j) / self.frame_rate
                for j in range(self.sweep_count)]
        return [t for t in taus if t >= clip_start - 1e-12]


def azimuth_cull_mask(sweep: PointCloud, sensor: SensorConfig) -> np.ndarray:
    """Points whose sensor-frame azimuth is within the effective FoV
    (inclusive at the half-angle)."""
    az = np.arctan2(sweep.xyz[:, 1], sweep.xyz[:, 0])
    half = np.deg2rad(sensor.fov_effective_deg) / 2.0
    return np.abs(az) <= half


def align_to_reference(sweep: PointCloud, sensor: SensorConfig) -> PointCloud:
    """FoV-cull in the sensor frame, then map into the reference frame.

    Culling happens here (not in the simulator alone) because the
    effective-FoV trim exists to drop self-occluded returns before any
    fusion or validation sees them.
    """
    expected = sensor_frame_id(sensor.sensor_id)
    if sweep.frame_id != expected:
        raise FrameMismatchError(
            f"sweep frame {sweep.frame_id!r} does not match sensor frame {expected!r}")
    kept = sweep.subset(azimuth_cull_mask(sweep, sensor))
    return apply_transform(sensor.extrinsic, kept, REFERENCE_FRAME)


def compensate_and_accumulate(sweeps: Mapping[tuple[int, float], PointCloud],
                              ego_poses: Mapping[float, RigidTransform],
                              window: WindowSpec) -> PointCloud:
    """Map every reference-frame sweep at time tau into the keyframe's
    reference frame and take the multiset union.

    With poses stored reference->world, a past point is carried over by
    T(t)^-1 . T(tau); the keyframe sweep goes through the same (identity)
    mapping for uniformity. Output order is canonical: sensor_id ascending,
    then tau ascending, then original point order. Per-point sensor_id and
    original timestamps are retained.
    """
    t = window.keyframe_t
    if t not in ego_poses:
        raise MissingPoseError(t)
    taus = window.timestamps()
    world_to_key = ego_poses[t].inverse()

    parts: list[PointCloud] = []
    for sid in sorted({k[0] for k in sweeps}):
        for tau in taus:
            cloud = sweeps.get((sid, tau))
            if cloud is None:
                continue
            if tau not in ego_poses:
                raise MissingPoseError(tau)
            comp = world_to_key.compose(ego_poses[tau])
            parts.append(apply_transform(comp, cloud, REFERENCE_FRAME))
    if not parts:
        return PointCloud.empty(REFERENCE_FRAME)
    return PointCloud.concat(parts, REFERENCE_FRAME)
