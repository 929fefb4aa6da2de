"""Deterministic geometry for bounding-box-projection pose estimation.

Encoders and decoders for point-to-face displacement fields, shape-prior
residuals, the non-linear shape augmentation, the losses that tie them
together, and NOCS-style evaluation metrics.
"""

from bboxpose.errors import *  # noqa: F401,F403
from bboxpose.geometry import (
    NocsCoord,
    OrientedBox,
    Pose9D,
    RotationEstimate,
    calibrate_rotation,
    camera_to_nocs,
    closest_rotation,
    nocs_to_camera,
    umeyama,
)

__version__ = "0.1.0"
