"""Cross-sensor consensus + self-consistency denoising of the accumulated
cloud.

A point survives when another radar corroborates it (any other-sensor
point strictly within tau_d) or when its own sensor's accumulated cloud
forms a dense enough local cluster around it (at least k_min proper
neighbors within radius r, inclusive). Both predicates are evaluated
against accumulated multi-sweep clouds.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from . import kernels
from .core import PointCloud
from .kernels.grid import build_grid, scan_reach


class ValidationInputError(ValueError):
    pass


@dataclass(frozen=True)
class ValidationParams:
    """Defaults are the production constants: tau_d 10 m, r 1 m, k_min 3.

    include_query_point switches the neighborhood count to the reading
    that counts the point itself (|N_r| >= k_min including p_a); the
    default counts proper neighbors only.
    """

    tau_d: float = 10.0
    r: float = 1.0
    k_min: int = 3
    include_query_point: bool = False

    def __post_init__(self) -> None:
        if self.tau_d <= 0.0 or self.r <= 0.0 or self.k_min < 1:
            raise ValueError("require tau_d > 0, r > 0, k_min >= 1")


class NeighborIndex:
    """Grid-bucket spatial hash with exact radius and nearest queries.

    Any brute-force-equivalent structure satisfies the same contract; this
    one buckets points into cubic cells of `cell_size` (default 1 m).
    """

    def __init__(self, xyz: np.ndarray, cell_size: float = 1.0):
        self.xyz = np.ascontiguousarray(xyz, dtype=np.float64).reshape(-1, 3)
        self._grid = build_grid(self.xyz, cell_size) if self.xyz.shape[0] else None

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def radius_query(self, p, rho: float) -> np.ndarray:
        """Indices of all points within Euclidean distance <= rho of p,
        ascending."""
        if self._grid is None:
            return np.zeros(0, dtype=np.int64)
        p = np.asarray(p, dtype=np.float64).reshape(3)
        g = self._grid
        reach = scan_reach(g, rho)
        c = np.floor((p - g.origin) / g.cell).astype(np.int64)
        lo = np.maximum(c - reach, 0)
        hi = np.minimum(c + reach, g.dims - 1)
        if (lo > hi).any():
            return np.zeros(0, dtype=np.int64)
        cand: list[np.ndarray] = []
        for cx in range(lo[0], hi[0] + 1):
            for cy in range(lo[1], hi[1] + 1):
                for cz in range(lo[2], hi[2] + 1):
                    f = (cx * g.dims[1] + cy) * g.dims[2] + cz
                    s, e = g.starts[f], g.starts[f + 1]
                    if e > s:
                        cand.append(g.order[s:e])
        if not cand:
            return np.zeros(0, dtype=np.int64)
        idx = np.concatenate(cand)
        d2 = (self.xyz[idx, 0] - p[0]) ** 2
        d2 += (self.xyz[idx, 1] - p[1]) ** 2
        d2 += (self.xyz[idx, 2] - p[2]) ** 2
        return np.sort(idx[d2 <= rho * rho])

    def nearest(self, p) -> tuple[int, float]:
        if self._grid is None:
            raise ValueError("nearest query on an empty index")
        p = np.asarray(p, dtype=np.float64).reshape(1, 3)
        idx, d2 = kernels.nearest_neighbor(p, self.xyz)
        return int(idx[0]), float(np.sqrt(d2[0]))


def build_neighbor_index(cloud: PointCloud, cell_size: float = 1.0) -> NeighborIndex:
    return NeighborIndex(cloud.xyz, cell_size)


def _canonical_concat(per_sensor_clouds: Mapping[int, PointCloud]) -> PointCloud:
    sids = sorted(per_sensor_clouds)
    if not sids:
        raise ValidationInputError("no sensor clouds given")
    frames = {per_sensor_clouds[s].frame_id for s in sids}
    if len(frames) > 1:
        raise ValidationInputError(f"clouds are in different frames: {sorted(frames)}")
    for sid in sids:
        ids = per_sensor_clouds[sid].sensor_id
        if ids.shape[0] and not (ids == sid).all():
            bad = int(ids[ids != sid][0])
            raise ValidationInputError(
                f"cloud keyed {sid} contains points labeled sensor {bad}")
    return PointCloud.concat([per_sensor_clouds[s] for s in sids])


def validate(per_sensor_clouds: Mapping[int, PointCloud],
             params: ValidationParams) -> tuple[PointCloud, np.ndarray]:
    """Grid-accelerated filter. Returns the kept cloud plus keep flags
    aligned with the canonical concatenation (sensor_id ascending, input
    order within each sensor)."""
    merged = _canonical_concat(per_sensor_clouds)
    if len(merged) == 0:
        return merged, np.zeros(0, dtype=bool)
    keep = kernels.validation_flags(merged.xyz, merged.sensor_id, params.tau_d,
                                    params.r, params.k_min,
                                    params.include_query_point)
    return merged.subset(keep), keep


def validate_bruteforce(per_sensor_clouds: Mapping[int, PointCloud],
                        params: ValidationParams,
                        block: int = 512) -> tuple[PointCloud, np.ndarray]:
    """Reference implementation: exhaustive pairwise scan, same contract as
    validate(). Kept as an independent oracle; do not fold the two."""
    merged = _canonical_concat(per_sensor_clouds)
    n = len(merged)
    if n == 0:
        return merged, np.zeros(0, dtype=bool)
    xyz = merged.xyz
    sid = merged.sensor_id
    tau2 = params.tau_d * params.tau_d
    r2 = params.r * params.r
    base = 1 if params.include_query_point else 0
    keep = np.zeros(n, dtype=bool)
    for q0 in range(0, n, block):
        q1 = min(q0 + block, n)
        d2 = (xyz[q0:q1, 0:1] - xyz[None, :, 0]) ** 2
        d2 += (xyz[q0:q1, 1:2] - xyz[None, :, 1]) ** 2
        d2 += (xyz[q0:q1, 2:3] - xyz[None, :, 2]) ** 2
        other = sid[q0:q1, None] != sid[None, :]
        cross = ((d2 < tau2) & other).any(axis=1)
        same = ~other
        same[np.arange(q1 - q0), np.arange(q0, q1)] = False  # exclude self
        counts = ((d2 <= r2) & same).sum(axis=1) + base
        keep[q0:q1] = cross | (counts >= params.k_min)
    return merged.subset(keep), keep
