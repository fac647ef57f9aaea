from __future__ import annotations

import numpy as np
import pytest

from radarpc.core import PointCloud, RigidTransform, SensorConfig
from radarpc.synth import ObjectTrack, Scene


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish proper rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_cloud(rng: np.random.Generator, n: int, frame_id: str = "reference",
                 sensor_id: int = 0, extent: float = 50.0) -> PointCloud:
    return PointCloud(rng.uniform(-extent, extent, (n, 3)),
                      rng.uniform(-10, 30, n), rng.normal(0, 5, n),
                      np.full(n, sensor_id, np.int64),
                      rng.uniform(0, 1, n), frame_id)


def static_scene(objects: list[tuple[np.ndarray, tuple, str]],
                 sensors: list[SensorConfig], n_frames: int = 3,
                 frame_rate: float = 20.0) -> Scene:
    """Hand-built static world: ego fixed at the origin, objects pinned at
    the given centers."""
    tracks = []
    for oid, (center, size, cat) in enumerate(objects):
        centers = np.tile(np.asarray(center, dtype=float), (n_frames, 1))
        tracks.append(ObjectTrack(oid, cat, size, 1.0, 10.0, centers,
                                  np.zeros(n_frames), np.zeros((n_frames, 2))))
    duration = (n_frames - 1) / frame_rate
    return Scene(sensors, np.zeros((n_frames, 3)), np.zeros(n_frames),
                 tracks, duration, frame_rate)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
