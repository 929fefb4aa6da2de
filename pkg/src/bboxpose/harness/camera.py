"""Pinhole depth back-projection and a point-splat depth renderer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bboxpose.errors import EmptyMask, NonPositiveDepth


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    depth_scale: float = 1.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


# REAL275 intrinsics
REAL275 = CameraIntrinsics(591.0125, 590.16775, 322.525, 244.11084)


def backproject(depth, mask, K: CameraIntrinsics) -> np.ndarray:
    """Camera-frame points of every masked pixel, in row-major pixel order.

    Pixel ``(u, v)`` is column ``u``, row ``v``; raw depth is multiplied by
    ``K.depth_scale`` to get meters.
    """
    depth = np.asarray(depth, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if depth.shape != mask.shape:
        raise ValueError(f"depth {depth.shape} and mask {mask.shape} differ")
    v, u = np.nonzero(mask)
    if v.size == 0:
        raise EmptyMask("mask selects no pixels")
    d = depth[v, u] * K.depth_scale
    if np.any(~(d > 0)):
        raise NonPositiveDepth(f"{int(np.count_nonzero(~(d > 0)))} masked pixels have depth <= 0")
    x = (u - K.cx) * d / K.fx
    y = (v - K.cy) * d / K.fy
    return np.column_stack([x, y, d])


def project(points, K: CameraIntrinsics) -> np.ndarray:
    """(N, 2) continuous pixel coordinates ``(u, v)``."""
    P = np.asarray(points, dtype=float)
    return np.column_stack([K.fx * P[:, 0] / P[:, 2] + K.cx, K.fy * P[:, 1] / P[:, 2] + K.cy])


def render_depth(points, K: CameraIntrinsics, height: int, width: int):
    """Z-buffer splat of points to their nearest pixel.

    Returns ``(depth, mask)`` with depth in raw units (meters divided by
    ``depth_scale``).
    """
    P = np.asarray(points, dtype=float)
    P = P[P[:, 2] > 0]
    uv = np.rint(project(P, K)).astype(int)
    ok = (uv[:, 0] >= 0) & (uv[:, 0] < width) & (uv[:, 1] >= 0) & (uv[:, 1] < height)
    uv, z = uv[ok], P[ok, 2]
    depth = np.full((height, width), np.inf)
    # nearest surface wins
    np.minimum.at(depth, (uv[:, 1], uv[:, 0]), z)
    mask = np.isfinite(depth)
    depth[~mask] = 0.0
    return depth / K.depth_scale, mask
