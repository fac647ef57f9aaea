"""Dense uniform-grid bucketing shared by both kernel backends.

Points are binned into cubic cells; occupants are reachable through a CSR
layout (order + starts). The cell edge may be enlarged beyond the request
to cap the number of cells; callers must derive their scan reach from the
actual cell size.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

MAX_CELLS = 1 << 22


class CellGrid(NamedTuple):
    origin: np.ndarray   # (3,) lower corner
    cell: float          # actual cell edge (>= requested)
    dims: np.ndarray     # (3,) int64 cell counts per axis
    coords: np.ndarray   # (n, 3) int64 cell coordinate of each point
    flat: np.ndarray     # (n,) int64 flattened cell id of each point
    order: np.ndarray    # (n,) int64 point indices sorted by flat id
    starts: np.ndarray   # (ncells + 1,) int64 CSR starts into order


def build_grid(xyz: np.ndarray, cell: float) -> CellGrid:
    if cell <= 0.0:
        raise ValueError("cell size must be positive")
    xyz = np.ascontiguousarray(xyz, dtype=np.float64)
    origin = xyz.min(axis=0)
    extent = xyz.max(axis=0) - origin

    # grow the cell until the dense cell table fits the budget
    while True:
        dims = np.floor(extent / cell).astype(np.int64) + 1
        if int(np.prod(dims)) <= MAX_CELLS:
            break
        cell *= 2.0

    coords = np.floor((xyz - origin) / cell).astype(np.int64)
    np.clip(coords, 0, dims - 1, out=coords)
    flat = (coords[:, 0] * dims[1] + coords[:, 1]) * dims[2] + coords[:, 2]
    order = np.argsort(flat, kind="stable").astype(np.int64)
    ncells = int(np.prod(dims))
    counts = np.bincount(flat, minlength=ncells)
    starts = np.zeros(ncells + 1, dtype=np.int64)
    np.cumsum(counts, out=starts[1:])
    return CellGrid(origin, float(cell), dims, coords, flat, order, starts)


def scan_reach(grid: CellGrid, radius: float) -> int:
    """Cell offsets to scan so every point within `radius` is a candidate.
    The +1 absorbs floor() rounding at cell boundaries."""
    return int(np.ceil(radius / grid.cell)) + 1
