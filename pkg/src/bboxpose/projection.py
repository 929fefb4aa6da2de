"""Point-to-face displacement fields (DVPB), prior hypotheses and residuals.

Faces are ordered ``x+, x-, y+, y-, z+, z-``. Every field stores one
3-vector per (point, face) in camera space; fields built from a pose also
keep the signed scalar magnitudes and the six directed face normals, so
``vectors == scalars[..., None] * directions``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from bboxpose.errors import DegenerateField, MaskMismatch, SymmetryUnsupported
from bboxpose.geometry import Pose9D, closest_rotation

SCHEMA_VERSION = 1


class FaceId(enum.Enum):
    X_POS = (0, 1)
    X_NEG = (0, -1)
    Y_POS = (1, 1)
    Y_NEG = (1, -1)
    Z_POS = (2, 1)
    Z_NEG = (2, -1)

    @property
    def axis(self) -> int:
        return self.value[0]

    @property
    def sign(self) -> int:
        return self.value[1]

    @property
    def index(self) -> int:
        return 2 * self.axis + (0 if self.sign > 0 else 1)

    @property
    def label(self) -> str:
        return "xyz"[self.axis] + ("+" if self.sign > 0 else "-")

    @classmethod
    def from_label(cls, label: str) -> "FaceId":
        for f in cls:
            if f.label == label:
                return f
        raise ValueError(f"unknown face {label!r}")


FACES = tuple(FaceId)
FACE_LABELS = tuple(f.label for f in FACES)
FACE_AXIS = np.array([f.axis for f in FACES])
FACE_SIGN = np.array([f.sign for f in FACES], dtype=float)

SYMMETRY_TYPES = ("none", "axial-y")

# Mug is treated as non-symmetric: its handle breaks the axial symmetry.
DEFAULT_SYMMETRY = {
    "bottle": "axial-y",
    "bowl": "axial-y",
    "can": "axial-y",
    "camera": "none",
    "laptop": "none",
    "mug": "none",
}


@dataclass(frozen=True)
class SymmetryTag:
    category: str = ""
    symmetry: str = "none"

    def __post_init__(self):
        if self.symmetry not in SYMMETRY_TYPES:
            raise ValueError(f"unknown symmetry type {self.symmetry!r}")

    @classmethod
    def for_category(cls, category: str, table: Optional[dict] = None) -> "SymmetryTag":
        table = DEFAULT_SYMMETRY if table is None else table
        return cls(category, table.get(category, "none"))


NO_SYMMETRY = SymmetryTag("", "none")


def valid_faces(sym: SymmetryTag) -> frozenset:
    if sym.symmetry == "axial-y":
        return frozenset({FaceId.Y_POS, FaceId.Y_NEG})
    return frozenset(FACES)


def face_mask(sym: SymmetryTag) -> np.ndarray:
    faces = valid_faces(sym)
    return np.array([f in faces for f in FACES])


def face_directions(R) -> np.ndarray:
    """(6, 3) outward face normals ``sign * R[:, axis]`` in camera frame."""
    R = np.asarray(R, dtype=float)
    return R.T[FACE_AXIS] * FACE_SIGN[:, None]


@dataclass
class ProjectionField:
    """Per-point, per-face displacement vectors with a face validity mask."""

    vectors: np.ndarray
    mask: np.ndarray
    scalars: Optional[np.ndarray] = None
    directions: Optional[np.ndarray] = None

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.vectors.ndim != 3 or self.vectors.shape[1:] != (6, 3):
            raise ValueError(f"vectors must be (N, 6, 3), got {self.vectors.shape}")
        if self.mask.shape != (6,):
            raise ValueError("mask must have 6 entries")
        if self.scalars is not None:
            self.scalars = np.asarray(self.scalars, dtype=float)
        if self.directions is not None:
            self.directions = np.asarray(self.directions, dtype=float)

    @property
    def n_points(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_scalars(cls, scalars, directions, mask) -> "ProjectionField":
        scalars = np.where(mask[None, :], np.asarray(scalars, dtype=float), 0.0)
        return cls(scalars[..., None] * directions[None], mask, scalars, directions)

    def valid_vectors(self) -> np.ndarray:
        return self.vectors[:, self.mask]

    def __add__(self, other: "SprvField") -> "ProjectionField":
        # hypothesis + residual -> recovered field
        if not isinstance(other, SprvField):
            return NotImplemented
        _check_masks(self.mask, other.mask, self.n_points, other.n_points)
        return ProjectionField(self.vectors + other.residuals, self.mask.copy())


@dataclass
class SprvField:
    """Residuals from a hypothesis field to the ground-truth field."""

    residuals: np.ndarray
    mask: np.ndarray
    hypothesis: Optional[ProjectionField] = None

    def __post_init__(self):
        self.residuals = np.asarray(self.residuals, dtype=float)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.residuals.ndim != 3 or self.residuals.shape[1:] != (6, 3):
            raise ValueError(f"residuals must be (N, 6, 3), got {self.residuals.shape}")

    @property
    def n_points(self) -> int:
        return self.residuals.shape[0]

    def magnitudes(self) -> np.ndarray:
        """Euclidean norm of every valid residual, flattened."""
        return np.linalg.norm(self.residuals[:, self.mask], axis=-1).ravel()


def _check_masks(ma, mb, na, nb):
    if na != nb:
        raise MaskMismatch(f"point counts differ: {na} vs {nb}")
    if not np.array_equal(ma, mb):
        raise MaskMismatch(f"face masks differ: {ma.tolist()} vs {mb.tolist()}")


def encode_dvpb(points, pose: Pose9D, sym: SymmetryTag = NO_SYMMETRY) -> ProjectionField:
    """Displacement from each point to its projection on each box face.

    The scalar for face (axis, sign) is ``s_axis / 2 - sign * <r_axis, P - t>``;
    it is negative for points outside that face and is kept unclamped.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    local = (P - pose.translation) @ pose.rotation
    scalars = pose.size[FACE_AXIS][None, :] / 2.0 - FACE_SIGN[None, :] * local[:, FACE_AXIS]
    return ProjectionField.from_scalars(scalars, face_directions(pose.rotation), face_mask(sym))


def encode_dvpb_nocs(coord, model_size, sym: SymmetryTag = NO_SYMMETRY, center=None) -> np.ndarray:
    """Per-face signed scalars of NOCS points against a NOCS box.

    Returns an (N, 6) array; masked faces are zero. ``center`` defaults to
    the origin.
    """
    c = getattr(coord, "coordinate", coord)
    c = np.atleast_2d(np.asarray(c, dtype=float))
    s = np.asarray(model_size, dtype=float).reshape(3)
    if center is not None:
        c = c - np.asarray(center, dtype=float).reshape(3)
    out = s[FACE_AXIS][None, :] / 2.0 - FACE_SIGN[None, :] * c[:, FACE_AXIS]
    return np.where(face_mask(sym)[None, :], out, 0.0)


def hypothesize_dvpb(nocs_scalars, L: float, R, sym: SymmetryTag = NO_SYMMETRY) -> ProjectionField:
    """Lift NOCS face scalars to camera-space vectors ``L * scalar * sign * r_axis``."""
    if L <= 0:
        raise ValueError("diagonal length must be positive")
    scalars = L * np.atleast_2d(np.asarray(nocs_scalars, dtype=float))
    return ProjectionField.from_scalars(scalars, face_directions(R), face_mask(sym))


def compute_sprv(gt: ProjectionField, hyp: ProjectionField) -> SprvField:
    _check_masks(gt.mask, hyp.mask, gt.n_points, hyp.n_points)
    diff = np.where(gt.mask[None, :, None], gt.vectors - hyp.vectors, 0.0)
    return SprvField(diff, gt.mask.copy(), hyp)


def decode_pose(field: ProjectionField, points, sym: SymmetryTag = NO_SYMMETRY,
                eps: float = 1e-12) -> Pose9D:
    """Least-squares 9DoF pose from a full six-face field.

    For each axis, ``v+ - v-`` equals ``s_axis * r_axis`` on an exact field,
    so its mean over points gives the axis direction. Projecting both
    vectors on that direction recovers ``m+`` and ``m-``; their sum is the
    size and half their difference is the point's offset along the axis.
    """
    if sym.symmetry != "none":
        raise SymmetryUnsupported(f"cannot decode a {sym.symmetry} field")
    if not field.mask.all():
        raise SymmetryUnsupported("decoding needs all six faces")
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] != field.n_points:
        raise MaskMismatch(f"{P.shape[0]} points for a field of {field.n_points}")
    if P.shape[0] < 3:
        raise DegenerateField("need at least 3 points")
    V = field.vectors
    if not np.all(np.isfinite(V)):
        raise DegenerateField("field contains non-finite vectors")

    dirs = np.empty((3, 3))
    offsets = np.empty((P.shape[0], 3))
    size = np.empty(3)
    for a in range(3):
        vp, vm = V[:, 2 * a], V[:, 2 * a + 1]
        d = (vp - vm).mean(axis=0)
        norm = np.linalg.norm(d)
        scale = max(np.abs(vp).max(), np.abs(vm).max(), 1.0)
        if norm <= eps * scale:
            raise DegenerateField(f"axis {'xyz'[a]} direction is unrecoverable")
        d /= norm
        mp = vp @ d
        mm = -(vm @ d)
        dirs[:, a] = d
        size[a] = (mp + mm).mean()
        offsets[:, a] = (mm - mp) / 2.0
    R = closest_rotation(dirs)
    # <r_axis, t> from every point, using the orthogonalized axes
    proj_t = (P @ R - offsets).mean(axis=0)
    t = R @ proj_t
    if not np.all(size > 0):
        raise DegenerateField(f"decoded non-positive size {size}")
    return Pose9D(R, t, size)


def field_to_dict(field) -> dict:
    """JSON-ready dict. Arrays are flattened row-major."""
    if isinstance(field, SprvField):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "sprv",
            "n_points": field.n_points,
            "faces": list(FACE_LABELS),
            "mask": field.mask.tolist(),
            "residuals": field.residuals.ravel().tolist(),
            "hypothesis": None if field.hypothesis is None else field_to_dict(field.hypothesis),
        }
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "dvpb",
        "n_points": field.n_points,
        "faces": list(FACE_LABELS),
        "mask": field.mask.tolist(),
        "vectors": field.vectors.ravel().tolist(),
        "scalars": None if field.scalars is None else field.scalars.ravel().tolist(),
        "directions": None if field.directions is None else field.directions.ravel().tolist(),
    }


def field_from_dict(d: dict):
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {d.get('schema_version')!r}")
    if list(d["faces"]) != list(FACE_LABELS):
        raise ValueError(f"unexpected face order {d['faces']}")
    n = int(d["n_points"])
    mask = np.array(d["mask"], dtype=bool)
    if d["kind"] == "sprv":
        hyp = None if d.get("hypothesis") is None else field_from_dict(d["hypothesis"])
        return SprvField(np.array(d["residuals"], dtype=float).reshape(n, 6, 3), mask, hyp)
    if d["kind"] != "dvpb":
        raise ValueError(f"unknown field kind {d['kind']!r}")
    scalars = d.get("scalars")
    directions = d.get("directions")
    return ProjectionField(
        np.array(d["vectors"], dtype=float).reshape(n, 6, 3),
        mask,
        None if scalars is None else np.array(scalars, dtype=float).reshape(n, 6),
        None if directions is None else np.array(directions, dtype=float).reshape(6, 3),
    )


def dump_field(field, path) -> None:
    with open(path, "w") as f:
        json.dump(field_to_dict(field), f)


def load_field(path):
    with open(path) as f:
        return field_from_dict(json.load(f))
