"""Category-specific shape augmentation in the canonical object frame.

A1 scales one axis with a parabolic profile of the point's own coordinate
and the other two uniformly; A2 swings the upper plane of a laptop about
its hinge. All randomness comes from a caller-supplied seed or generator.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from bboxpose.errors import UnlabeledPoints
from bboxpose.geometry import Pose9D, axis_angle

GAMMA_MAX_RANGE = (1.0, 1.3)
GAMMA_MIN_RANGE = (0.7, 1.0)
GAMMA_RANGE = (0.8, 1.2)
HINGE_RANGE = (-np.pi / 6, np.pi / 6)

A1_AXIS = {"bottle": "y", "bowl": "y", "can": "y", "mug": "y", "camera": "x"}
_AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class AugmentParams:
    gamma_max: float = 1.0
    gamma_min: float = 1.0
    gamma: float = 1.0
    axis: str = "y"
    hinge_angle: float = 0.0
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.gamma_min <= 1.0 <= self.gamma_max:
            raise ValueError(
                f"need gamma_min <= 1 <= gamma_max, got {self.gamma_min}, {self.gamma_max}"
            )
        if self.axis not in ("x", "y"):
            raise ValueError(f"A1 axis must be x or y, got {self.axis!r}")

    @classmethod
    def sample(cls, seed: int, axis: str = "y",
               gamma_max_range=GAMMA_MAX_RANGE, gamma_min_range=GAMMA_MIN_RANGE,
               gamma_range=GAMMA_RANGE, hinge_range=HINGE_RANGE) -> "AugmentParams":
        rng = np.random.default_rng(seed)
        return cls(
            gamma_max=float(rng.uniform(*gamma_max_range)),
            gamma_min=float(rng.uniform(*gamma_min_range)),
            gamma=float(rng.uniform(*gamma_range)),
            axis=axis,
            hinge_angle=float(rng.uniform(*hinge_range)),
            seed=seed,
        )


def scale_profile(p_star, params: AugmentParams):
    """Parabolic scale: ``gamma_min`` at the center, ``gamma_max`` at +-0.5."""
    p = np.asarray(p_star, dtype=float)
    return params.gamma_min + 4.0 * (params.gamma_max - params.gamma_min) * p * p


def augment_a1(points, params: AugmentParams, axis_extent: Optional[float] = None) -> np.ndarray:
    """Non-linear axis scaling of canonical points.

    ``axis_extent`` is the box length along the selected axis; it maps the
    coordinate into [-0.5, 0.5] before evaluating the profile. Leave it as
    None when points are already normalized that way.
    """
    P = np.asarray(points, dtype=float)
    k = _AXIS_INDEX[params.axis]
    coord = P[..., k]
    p_star = coord if axis_extent is None else coord / axis_extent
    p_star = np.clip(p_star, -0.5, 0.5)
    out = P * params.gamma
    out[..., k] = scale_profile(p_star, params) * coord
    return out


def augment_linear(points, scales) -> np.ndarray:
    return np.asarray(points, dtype=float) * np.asarray(scales, dtype=float)


def augment_a2(points, upper, theta: float, hinge=(0.0, 0.0), scales=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Rotate the upper plane of a laptop about a hinge line parallel to z.

    Args:
      points: (N, 3) canonical points.
      upper: (N,) boolean labels; True for the lid, False for the base.
      theta: rotation angle in radians, counter-clockwise about +z.
      hinge: (a_x, a_y) position of the hinge line.
      scales: per-axis scaling applied to every point afterwards.
    """
    P = np.asarray(points, dtype=float)
    if upper is None:
        raise UnlabeledPoints("upper/lower labels are required")
    upper = np.asarray(upper, dtype=bool)
    if upper.shape != P.shape[:1]:
        raise UnlabeledPoints(f"{upper.shape[0]} labels for {P.shape[0]} points")
    ax, ay = hinge
    out = P.copy()
    dx = P[upper, 0] - ax
    dy = P[upper, 1] - ay
    c, s = np.cos(theta), np.sin(theta)
    out[upper, 0] = ax + c * dx - s * dy
    out[upper, 1] = ay + s * dx + c * dy
    return out * np.asarray(scales, dtype=float)


def to_canonical(points, pose: Pose9D) -> np.ndarray:
    return (np.asarray(points, dtype=float) - pose.translation) @ pose.rotation


def augment_observed(points, pose: Pose9D, transform, reference=None):
    """Apply a canonical-frame ``transform`` to a camera-frame cloud.

    The transformed shape has a different box, so the returned pose is
    re-fit to it. ``reference`` holds canonical metric points (usually the
    full model) whose transformed extent defines the new box; by default
    the observed cloud itself is used.
    """
    canon = transform(to_canonical(points, pose))
    ref = canon if reference is None else transform(np.asarray(reference, dtype=float))
    lo, hi = ref.min(axis=0), ref.max(axis=0)
    center = (lo + hi) / 2.0
    new_pose = Pose9D(pose.rotation, pose.translation + pose.rotation @ center, hi - lo)
    return canon @ pose.rotation.T + pose.translation, new_pose


def perturb_observation(points, pose: Pose9D, sigma: float = 0.0, rot_jitter: float = 0.0,
                        trans_jitter: float = 0.0, seed=None):
    """Gaussian point noise plus a rigid jitter about the object center.

    ``rot_jitter`` (rad) and ``trans_jitter`` (m) are standard deviations of
    the jitter angle and of each translation component. The pose is updated
    with the rigid part so it still labels the cloud exactly; point noise
    leaves the label unchanged.
    """
    if sigma < 0 or rot_jitter < 0 or trans_jitter < 0:
        raise ValueError("noise levels must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    P = np.asarray(points, dtype=float)
    axis = rng.standard_normal(3)
    angle = rng.normal(0.0, rot_jitter) if rot_jitter > 0 else 0.0
    dt = rng.normal(0.0, trans_jitter, 3) if trans_jitter > 0 else np.zeros(3)
    noise = rng.normal(0.0, sigma, P.shape) if sigma > 0 else np.zeros_like(P)

    dR = axis_angle(axis, angle)
    t = pose.translation
    P_new = (P - t) @ dR.T + t + dt + noise
    new_pose = replace(pose, rotation=dR @ pose.rotation, translation=t + dt)
    return P_new, new_pose
