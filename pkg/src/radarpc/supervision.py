"""Diffusion training target: lidar ground removal, in-box foreground
extraction, pseudo-radar attribute assignment, and injection into the
radar background.

The injected background is the validated radar cloud, bit for bit; only
foreground rows are appended. Pseudo points carry the reserved sensor_id
-1 so their lineage stays recoverable downstream.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import PSEUDO_SENSOR_ID, Box3D, PointCloud, points_in_box_mask

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GroundParams:
    method: str = "plane_ransac"   # plane_ransac | z_threshold
    z_cut: float = 0.2
    ransac_iters: int = 100
    inlier_tol: float = 0.15
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method not in ("plane_ransac", "z_threshold"):
            raise ValueError(f"unknown ground removal method {self.method!r}")
        if self.inlier_tol <= 0.0:
            raise ValueError("inlier_tol must be positive")


def _ransac_ground_mask(xyz: np.ndarray, p: GroundParams) -> np.ndarray | None:
    """Inlier mask of the dominant near-horizontal plane, or None if no
    sampled plane qualifies (|normal.z| > 0.9)."""
    n = xyz.shape[0]
    if n < 3:
        return None
    rng = np.random.default_rng(p.seed)
    best: np.ndarray | None = None
    best_count = -1
    for _ in range(p.ransac_iters):
        i, j, k = rng.choice(n, size=3, replace=False)
        normal = np.cross(xyz[j] - xyz[i], xyz[k] - xyz[i])
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        if abs(normal[2]) <= 0.9:
            continue
        dist = np.abs(xyz @ normal - xyz[i] @ normal)
        inliers = dist <= p.inlier_tol
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best = inliers
    return best


def remove_ground(lidar: PointCloud, p: GroundParams) -> PointCloud:
    """Drop ground points. plane_ransac falls back to the z threshold (with
    a warning) when no near-horizontal plane is found."""
    if len(lidar) == 0:
        return lidar
    if p.method == "plane_ransac":
        mask = _ransac_ground_mask(lidar.xyz, p)
        if mask is not None:
            return lidar.subset(~mask)
        log.warning("plane fit failed (%d points); falling back to z_cut=%s",
                    len(lidar), p.z_cut)
    return lidar.subset(lidar.xyz[:, 2] >= p.z_cut)


def extract_box_foreground(cloud: PointCloud,
                           boxes: Sequence[Box3D]) -> dict[int, PointCloud]:
    """Points inside each box, keyed by box id. A point inside several
    overlapping boxes lands in every one of them."""
    out: dict[int, PointCloud] = {}
    for box in boxes:
        mask = points_in_box_mask(cloud.xyz, box)
        out[box.id] = cloud.subset(mask)
    return out


def make_pseudo_radar_fg(lidar_fg: Mapping[int, PointCloud],
                         radar_validated: PointCloud,
                         boxes: Sequence[Box3D],
                         keyframe_t: float) -> tuple[PointCloud, list[int]]:
    """Lidar foreground points re-attributed with per-box mean radar RCS
    and Doppler. Boxes holding lidar points but no validated radar points
    fall back to zero attributes; their ids are returned for reporting."""
    fallback_ids: list[int] = []
    parts: list[PointCloud] = []
    for box in boxes:
        fg = lidar_fg.get(box.id)
        if fg is None or len(fg) == 0:
            continue
        radar_mask = points_in_box_mask(radar_validated.xyz, box)
        if radar_mask.any():
            rcs = float(np.mean(radar_validated.rcs[radar_mask]))
            doppler = float(np.mean(radar_validated.doppler[radar_mask]))
        else:
            rcs, doppler = 0.0, 0.0
            fallback_ids.append(box.id)
        n = len(fg)
        parts.append(PointCloud(fg.xyz, np.full(n, rcs), np.full(n, doppler),
                                np.full(n, PSEUDO_SENSOR_ID, np.int64),
                                np.full(n, keyframe_t), radar_validated.frame_id))
    if not parts:
        return PointCloud.empty(radar_validated.frame_id), fallback_ids
    return PointCloud.concat(parts, radar_validated.frame_id), fallback_ids


@dataclass(frozen=True)
class SupervisionTarget:
    """Validated radar background followed by injected pseudo foreground;
    fg_mask is True exactly on the injected rows."""

    target_cloud: PointCloud
    fg_mask: np.ndarray

    def __post_init__(self) -> None:
        mask = np.asarray(self.fg_mask, dtype=bool)
        if mask.shape[0] != len(self.target_cloud):
            raise ValueError("fg_mask must align with target_cloud")
        mask = np.ascontiguousarray(mask)
        mask.flags.writeable = False
        object.__setattr__(self, "fg_mask", mask)

    @property
    def background(self) -> PointCloud:
        return self.target_cloud.subset(~self.fg_mask)

    @property
    def foreground(self) -> PointCloud:
        return self.target_cloud.subset(self.fg_mask)


def inject_foreground(radar_validated: PointCloud,
                      pseudo_fg: PointCloud) -> SupervisionTarget:
    """Concatenate background + foreground; the background rows stay
    untouched in value and order."""
    if len(pseudo_fg) and pseudo_fg.frame_id != radar_validated.frame_id:
        raise ValueError(f"frame mismatch: {radar_validated.frame_id!r} vs "
                         f"{pseudo_fg.frame_id!r}")
    target = PointCloud.concat([radar_validated, pseudo_fg])
    mask = np.concatenate([np.zeros(len(radar_validated), dtype=bool),
                           np.ones(len(pseudo_fg), dtype=bool)])
    return SupervisionTarget(target, mask)
