"""Pure-numpy kernel backend.

Same grid algorithm as the numba backend, vectorized per cell offset
instead of per point. Distance accumulation order matches the numba loops
(x, then y, then z) so the two backends agree bit for bit.
"""
from __future__ import annotations

import numpy as np

from .grid import build_grid, scan_reach

_QUERY_BLOCK = 512
_REF_BLOCK = 8192


def nearest_neighbor(query: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n, dim = query.shape
    best_d2 = np.full(n, np.inf)
    best_idx = np.zeros(n, dtype=np.int64)
    for q0 in range(0, n, _QUERY_BLOCK):
        q1 = min(q0 + _QUERY_BLOCK, n)
        qb = query[q0:q1]
        bd = best_d2[q0:q1]
        bi = best_idx[q0:q1]
        for r0 in range(0, ref.shape[0], _REF_BLOCK):
            r1 = min(r0 + _REF_BLOCK, ref.shape[0])
            rb = ref[r0:r1]
            d2 = (qb[:, 0:1] - rb[None, :, 0]) ** 2
            for k in range(1, dim):
                d2 += (qb[:, k:k + 1] - rb[None, :, k]) ** 2
            am = np.argmin(d2, axis=1)
            dm = d2[np.arange(q1 - q0), am]
            better = dm < bd  # strict: earlier (lower) ref index wins ties
            bd[better] = dm[better]
            bi[better] = am[better] + r0
    return best_idx, best_d2


def _neighbor_pairs(grid, reach: int, active: np.ndarray):
    """Yield (query_idx, candidate_idx) arrays, one batch per cell offset.

    `active` restricts the query side; candidates always come from the full
    grid. Candidate order within a batch follows the grid's CSR order.
    """
    dims = grid.dims
    coords = grid.coords[active]
    for dx in range(-reach, reach + 1):
        for dy in range(-reach, reach + 1):
            for dz in range(-reach, reach + 1):
                nc = coords + np.array([dx, dy, dz], dtype=np.int64)
                ok = ((nc >= 0) & (nc < dims)).all(axis=1)
                if not ok.any():
                    continue
                qi = active[ok]
                flat = (nc[ok, 0] * dims[1] + nc[ok, 1]) * dims[2] + nc[ok, 2]
                s = grid.starts[flat]
                e = grid.starts[flat + 1]
                lengths = e - s
                total = int(lengths.sum())
                if total == 0:
                    continue
                qidx = np.repeat(qi, lengths)
                cum = np.cumsum(lengths)
                base = np.arange(total, dtype=np.int64) - np.repeat(cum - lengths, lengths)
                cand = grid.order[np.repeat(s, lengths) + base]
                yield qidx, cand


def _pair_sqdist(xyz: np.ndarray, qidx: np.ndarray, cand: np.ndarray) -> np.ndarray:
    d2 = (xyz[qidx, 0] - xyz[cand, 0]) ** 2
    d2 += (xyz[qidx, 1] - xyz[cand, 1]) ** 2
    d2 += (xyz[qidx, 2] - xyz[cand, 2]) ** 2
    return d2


def validation_flags(xyz: np.ndarray, sensor_ids: np.ndarray, tau_d: float,
                     r: float, k_min: int, include_query: bool) -> np.ndarray:
    n = xyz.shape[0]

    # cross-sensor support: any other-sensor point strictly within tau_d
    cross = np.zeros(n, dtype=bool)
    grid = build_grid(xyz, tau_d)
    reach = scan_reach(grid, tau_d)
    tau2 = tau_d * tau_d
    active = np.arange(n, dtype=np.int64)
    for qidx, cand in _neighbor_pairs(grid, reach, active):
        d2 = _pair_sqdist(xyz, qidx, cand)
        hit = (d2 < tau2) & (sensor_ids[qidx] != sensor_ids[cand])
        cross[qidx[hit]] = True

    # self-consistency: >= k_min same-sensor neighbors within r (inclusive)
    need = np.flatnonzero(~cross).astype(np.int64)
    counts = np.zeros(n, dtype=np.int64)
    if need.size:
        grid = build_grid(xyz, r)
        reach = scan_reach(grid, r)
        r2 = r * r
        for qidx, cand in _neighbor_pairs(grid, reach, need):
            d2 = _pair_sqdist(xyz, qidx, cand)
            hit = (d2 <= r2) & (sensor_ids[qidx] == sensor_ids[cand]) & (qidx != cand)
            np.add.at(counts, qidx[hit], 1)
    if include_query:
        counts += 1
    return cross | (counts >= k_min)


def radius_counts(xyz: np.ndarray, radius: float) -> np.ndarray:
    n = xyz.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    grid = build_grid(xyz, radius)
    reach = scan_reach(grid, radius)
    r2 = radius * radius
    for qidx, cand in _neighbor_pairs(grid, reach, np.arange(n, dtype=np.int64)):
        d2 = _pair_sqdist(xyz, qidx, cand)
        hit = (d2 <= r2) & (qidx != cand)
        np.add.at(counts, qidx[hit], 1)
    return counts
