"""Numba kernel backend: per-point loops over grid-bucketed candidates,
JIT-compiled and disk-cached. Arithmetic order mirrors numpy_impl exactly.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .grid import build_grid, scan_reach


@njit(cache=True)
def _nn_kernel(query, ref, out_idx, out_d2):
    n, dim = query.shape
    m = ref.shape[0]
    for i in range(n):
        best = np.inf
        best_j = 0
        for j in range(m):
            d2 = (query[i, 0] - ref[j, 0]) ** 2
            for k in range(1, dim):
                d2 += (query[i, k] - ref[j, k]) ** 2
            if d2 < best:  # strict: lowest index wins ties
                best = d2
                best_j = j
        out_idx[i] = best_j
        out_d2[i] = best


def nearest_neighbor(query: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    out_idx = np.zeros(query.shape[0], dtype=np.int64)
    out_d2 = np.zeros(query.shape[0])
    _nn_kernel(query, ref, out_idx, out_d2)
    return out_idx, out_d2


@njit(cache=True)
def _validate_kernel(xyz, sensor_ids,
                     coords_c, dims_c, order_c, starts_c, reach_c, tau2,
                     coords_s, dims_s, order_s, starts_s, reach_s, r2,
                     k_min, include_query, keep):
    n = xyz.shape[0]
    base = 1 if include_query else 0
    for i in range(n):
        sid = sensor_ids[i]

        cross = False
        for dx in range(-reach_c, reach_c + 1):
            cx = coords_c[i, 0] + dx
            if cx < 0 or cx >= dims_c[0]:
                continue
            for dy in range(-reach_c, reach_c + 1):
                cy = coords_c[i, 1] + dy
                if cy < 0 or cy >= dims_c[1]:
                    continue
                for dz in range(-reach_c, reach_c + 1):
                    cz = coords_c[i, 2] + dz
                    if cz < 0 or cz >= dims_c[2]:
                        continue
                    f = (cx * dims_c[1] + cy) * dims_c[2] + cz
                    for p in range(starts_c[f], starts_c[f + 1]):
                        j = order_c[p]
                        if sensor_ids[j] == sid:
                            continue
                        d2 = (xyz[i, 0] - xyz[j, 0]) ** 2
                        d2 += (xyz[i, 1] - xyz[j, 1]) ** 2
                        d2 += (xyz[i, 2] - xyz[j, 2]) ** 2
                        if d2 < tau2:
                            cross = True
                            break
                    if cross:
                        break
                if cross:
                    break
            if cross:
                break
        if cross:
            keep[i] = True
            continue

        count = base
        done = False
        for dx in range(-reach_s, reach_s + 1):
            cx = coords_s[i, 0] + dx
            if cx < 0 or cx >= dims_s[0]:
                continue
            for dy in range(-reach_s, reach_s + 1):
                cy = coords_s[i, 1] + dy
                if cy < 0 or cy >= dims_s[1]:
                    continue
                for dz in range(-reach_s, reach_s + 1):
                    cz = coords_s[i, 2] + dz
                    if cz < 0 or cz >= dims_s[2]:
                        continue
                    f = (cx * dims_s[1] + cy) * dims_s[2] + cz
                    for p in range(starts_s[f], starts_s[f + 1]):
                        j = order_s[p]
                        if j == i or sensor_ids[j] != sid:
                            continue
                        d2 = (xyz[i, 0] - xyz[j, 0]) ** 2
                        d2 += (xyz[i, 1] - xyz[j, 1]) ** 2
                        d2 += (xyz[i, 2] - xyz[j, 2]) ** 2
                        if d2 <= r2:
                            count += 1
                            if count >= k_min:
                                done = True
                                break
                    if done:
                        break
                if done:
                    break
            if done:
                break
        keep[i] = count >= k_min


def validation_flags(xyz: np.ndarray, sensor_ids: np.ndarray, tau_d: float,
                     r: float, k_min: int, include_query: bool) -> np.ndarray:
    gc = build_grid(xyz, tau_d)
    gs = build_grid(xyz, r)
    keep = np.zeros(xyz.shape[0], dtype=np.bool_)
    _validate_kernel(xyz, sensor_ids,
                     gc.coords, gc.dims, gc.order, gc.starts,
                     scan_reach(gc, tau_d), tau_d * tau_d,
                     gs.coords, gs.dims, gs.order, gs.starts,
                     scan_reach(gs, r), r * r,
                     k_min, include_query, keep)
    return keep


@njit(cache=True)
def _radius_count_kernel(xyz, coords, dims, order, starts, reach, r2, counts):
    n = xyz.shape[0]
    for i in range(n):
        c = 0
        for dx in range(-reach, reach + 1):
            cx = coords[i, 0] + dx
            if cx < 0 or cx >= dims[0]:
                continue
            for dy in range(-reach, reach + 1):
                cy = coords[i, 1] + dy
                if cy < 0 or cy >= dims[1]:
                    continue
                for dz in range(-reach, reach + 1):
                    cz = coords[i, 2] + dz
                    if cz < 0 or cz >= dims[2]:
                        continue
                    f = (cx * dims[1] + cy) * dims[2] + cz
                    for p in range(starts[f], starts[f + 1]):
                        j = order[p]
                        if j == i:
                            continue
                        d2 = (xyz[i, 0] - xyz[j, 0]) ** 2
                        d2 += (xyz[i, 1] - xyz[j, 1]) ** 2
                        d2 += (xyz[i, 2] - xyz[j, 2]) ** 2
                        if d2 <= r2:
                            c += 1
        counts[i] = c


def radius_counts(xyz: np.ndarray, radius: float) -> np.ndarray:
    g = build_grid(xyz, radius)
    counts = np.zeros(xyz.shape[0], dtype=np.int64)
    _radius_count_kernel(xyz, g.coords, g.dims, g.order, g.starts,
                         scan_reach(g, radius), radius * radius, counts)
    return counts
