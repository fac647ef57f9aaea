"""Hot numeric kernels with two interchangeable backends.

The numba backend JIT-compiles the inner loops; the numpy backend is a
vectorized fallback that needs no compiler. Both produce bit-identical
results (same arithmetic order in the distance accumulations).

Selection, once at import time:
  RADARPC_BACKEND=auto   use numba when importable, else numpy (default)
  RADARPC_BACKEND=numba  require numba, fail loudly if unavailable
  RADARPC_BACKEND=numpy  force the pure-numpy path

`benchmarks/bench_kernels.py` compares the two on representative loads.
"""
from __future__ import annotations

import os

import numpy as np

BACKEND_ENV = "RADARPC_BACKEND"
_VALID = ("auto", "numba", "numpy")

_backend_name = ""
_impl = None


def _resolve(requested: str):
    from . import numpy_impl

    if requested == "numpy":
        return "numpy", numpy_impl
    try:
        from . import numba_impl
        return "numba", numba_impl
    except Exception:
        if requested == "numba":
            raise
        return "numpy", numpy_impl


def set_backend(name: str) -> str:
    """Force a backend programmatically (mainly for tests and benchmarks)."""
    global _backend_name, _impl
    if name not in _VALID:
        raise ValueError(f"unknown kernel backend {name!r}; expected one of {_VALID}")
    _backend_name, _impl = _resolve(name)
    return _backend_name


def active_backend() -> str:
    return _backend_name


_requested = os.environ.get(BACKEND_ENV, "auto").strip().lower()
if _requested not in _VALID:
    raise ValueError(f"{BACKEND_ENV}={_requested!r} invalid; expected one of {_VALID}")
set_backend(_requested)


def nearest_neighbor(query: np.ndarray, ref: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per query point: index of the nearest ref point and the squared
    distance to it. Ties break to the lowest ref index. Works for 2D or 3D
    point sets; `ref` must be nonempty."""
    query = np.ascontiguousarray(query, dtype=np.float64)
    ref = np.ascontiguousarray(ref, dtype=np.float64)
    if ref.shape[0] == 0:
        raise ValueError("nearest_neighbor needs a nonempty reference set")
    if query.shape[0] == 0:
        return np.zeros(0, np.int64), np.zeros(0)
    return _impl.nearest_neighbor(query, ref)


def validation_flags(xyz: np.ndarray, sensor_ids: np.ndarray, tau_d: float,
                     r: float, k_min: int, include_query: bool = False) -> np.ndarray:
    """Keep mask of the cross-sensor / self-consistency point filter.

    A point is kept iff another sensor has a point strictly closer than
    tau_d, or its own sensor has at least k_min neighbors within radius r
    (inclusive). `include_query` switches the neighborhood count to the
    reading that counts the point itself.
    """
    xyz = np.ascontiguousarray(xyz, dtype=np.float64)
    sensor_ids = np.ascontiguousarray(sensor_ids, dtype=np.int64)
    if xyz.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    return _impl.validation_flags(xyz, sensor_ids, float(tau_d), float(r),
                                  int(k_min), bool(include_query))


def radius_counts(xyz: np.ndarray, radius: float) -> np.ndarray:
    """Number of points (excluding self) within `radius` of each point."""
    xyz = np.ascontiguousarray(xyz, dtype=np.float64)
    if xyz.shape[0] == 0:
        return np.zeros(0, np.int64)
    return _impl.radius_counts(xyz, float(radius))
