"""Pose and box types, NOCS transforms and closed-form rotation solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bboxpose.errors import DegenerateInput

ORTHO_TOL = 1e-9


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle(axis, angle: float) -> np.ndarray:
    """Rodrigues rotation about ``axis`` (need not be unit) by ``angle`` rad."""
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation (unit quaternion from a 4D Gaussian)."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Geodesic angle in radians between two rotations.

    Uses ``atan2`` of the skew and trace parts, accurate near zero.
    """
    M = np.asarray(Ra).T @ np.asarray(Rb)
    cos = (np.trace(M) - 1.0) / 2.0
    sin = np.linalg.norm([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]]) / 2.0
    return float(np.arctan2(sin, cos))


def is_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return bool(
        np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0.0)
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


@dataclass(frozen=True)
class Pose9D:
    """Rotation, translation (m) and full box size (m) of an object."""

    rotation: np.ndarray
    translation: np.ndarray
    size: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        s = np.asarray(self.size, dtype=float).reshape(3)
        if not is_rotation(R):
            raise DegenerateInput("rotation is not orthonormal with det +1")
        if not np.all(s > 0):
            raise DegenerateInput(f"size must be strictly positive, got {s}")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "size", s)

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.size))

    def to_box(self) -> "OrientedBox":
        return OrientedBox(self.translation, self.rotation, self.size)

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map canonical metric points (box centered at origin) to camera frame."""
        return np.asarray(points, dtype=float) @ self.rotation.T + self.translation

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "size": self.size.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Pose9D":
        return cls(np.array(d["rotation"]), np.array(d["translation"]), np.array(d["size"]))


@dataclass(frozen=True)
class OrientedBox:
    center: np.ndarray
    rotation: np.ndarray
    extents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float))
        object.__setattr__(self, "extents", np.asarray(self.extents, dtype=float).reshape(3))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    def corners(self) -> np.ndarray:
        signs = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], float)
        return (signs * self.extents / 2.0) @ self.rotation.T + self.center

    def contains(self, points: np.ndarray) -> np.ndarray:
        local = (np.asarray(points, dtype=float) - self.center) @ self.rotation
        return np.all(np.abs(local) <= self.extents / 2.0, axis=-1)

    def to_pose(self) -> Pose9D:
        return Pose9D(self.rotation, self.center, self.extents)


@dataclass(frozen=True)
class NocsCoord:
    """Points in the diagonal-normalized object space (one row per point)."""

    coordinate: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coordinate", np.asarray(self.coordinate, dtype=float))


@dataclass(frozen=True)
class RotationEstimate:
    """Two predicted box-face normals with their uncertainties."""

    rx: np.ndarray
    ry: np.ndarray
    ux: float = 1.0
    uy: float = 1.0

    def __post_init__(self):
        rx = np.asarray(self.rx, dtype=float).reshape(3)
        ry = np.asarray(self.ry, dtype=float).reshape(3)
        for name, v in (("rx", rx), ("ry", ry)):
            if abs(np.linalg.norm(v) - 1.0) > ORTHO_TOL:
                raise DegenerateInput(f"{name} must be a unit vector")
        if self.ux < 0 or self.uy < 0:
            raise DegenerateInput("uncertainties must be non-negative")
        if abs(float(rx @ ry)) >= 1.0 - ORTHO_TOL:
            raise DegenerateInput("rx and ry are parallel")
        object.__setattr__(self, "rx", rx)
        object.__setattr__(self, "ry", ry)


def umeyama(source, target):
    """Least-squares similarity transform with ``target ~ s * R @ source + t``.

    Args:
      source: (N, 3) points, N >= 3, not all collinear.
      target: (N, 3) corresponding points.

    Returns:
      ``(scale, rotation, translation)`` with det(rotation) = +1.
    """
    x = np.asarray(source, dtype=float)
    y = np.asarray(target, dtype=float)
    if x.ndim != 2 or x.shape[1] != 3 or x.shape != y.shape:
        raise DegenerateInput(f"need matching (N, 3) arrays, got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n < 3:
        raise DegenerateInput(f"need at least 3 points, got {n}")

    mx, my = x.mean(axis=0), y.mean(axis=0)
    dx, dy = x - mx, y - my
    sv_src = np.linalg.svd(dx, compute_uv=False)
    if sv_src[1] <= 1e-12 * max(sv_src[0], 1.0):
        raise DegenerateInput("source points are collinear or coincident")

    cov = dy.T @ dx / n
    U, d, Vt = np.linalg.svd(cov)
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = (U * S) @ Vt
    var_x = (dx**2).sum() / n
    scale = float((d * S).sum() / var_x)
    t = my - scale * R @ mx
    return scale, R, t


def closest_rotation(M) -> np.ndarray:
    """Nearest rotation to ``M`` in Frobenius norm."""
    M = np.asarray(M, dtype=float)
    U, sv, Vt = np.linalg.svd(M)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateInput("matrix is singular")
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    return (U * S) @ Vt


def calibrate_rotation(est: RotationEstimate) -> np.ndarray:
    """Orthogonalize two face normals inside the plane they span.

    The missing (or excess) angle to 90 degrees is split between the two
    columns in proportion ``ux : uy``, so the less certain normal moves more.
    Returns ``[rx', ry', rx' x ry']``.
    """
    rx, ry = est.rx, est.ry
    c = float(np.clip(rx @ ry, -1.0, 1.0))
    if abs(c) >= 1.0 - ORTHO_TOL:
        raise DegenerateInput("rx and ry are parallel")
    e1 = rx
    e2 = ry - c * rx
    e2 = e2 / np.linalg.norm(e2)
    phi = np.arccos(c)
    gap = np.pi / 2.0 - phi
    total = est.ux + est.uy
    wx = 0.5 if total == 0 else est.ux / total
    wy = 1.0 - wx
    ax = -wx * gap
    ay = phi + wy * gap
    rx_c = np.cos(ax) * e1 + np.sin(ax) * e2
    ry_c = np.cos(ay) * e1 + np.sin(ay) * e2
    return np.column_stack([rx_c, ry_c, np.cross(rx_c, ry_c)])


def camera_to_nocs(P, pose: Pose9D) -> NocsCoord:
    """``R^T (P - t) / L`` with ``L`` the box diagonal. Accepts (3,) or (N, 3)."""
    P = np.asarray(P, dtype=float)
    return NocsCoord((P - pose.translation) @ pose.rotation / pose.diagonal)


def nocs_to_camera(coord, pose: Pose9D) -> np.ndarray:
    c = coord.coordinate if isinstance(coord, NocsCoord) else np.asarray(coord, dtype=float)
    return (pose.diagonal * c) @ pose.rotation.T + pose.translation
