"""radarpc: multi-sensor 4D radar point cloud refinement.

Stages: synthetic labeled worlds -> spatio-temporal fusion -> cross-sensor
denoising -> BEV rasterization -> (pluggable) enhancement -> attribute
lifting into an enhanced hyper point cloud, plus the metrics to judge each
step.
"""

from .core import (Box3D, PointCloud, RadarPoint, RigidTransform,
                   SensorConfig, apply_transform, compose, invert,
                   point_in_box)

__version__ = "0.1.0"

__all__ = [
    "Box3D", "PointCloud", "RadarPoint", "RigidTransform", "SensorConfig",
    "apply_transform", "compose", "invert", "point_in_box", "__version__",
]
