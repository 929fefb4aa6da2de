"""Oriented-box IoU, symmetry-aware pose errors and precision sweeps."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterable, List, Sequence

import numpy as np

from bboxpose.errors import EmptyInput
from bboxpose.geometry import OrientedBox, Pose9D, rotation_angle
from bboxpose.projection import NO_SYMMETRY, SymmetryTag

DEFAULT_RESOLUTION = 50
# fixed so the sampling lattice, and every IoU, is reproducible
LATTICE_SEED = 0x10B0

IOU_THRESHOLDS = {"IoU50": 0.5, "IoU75": 0.75}
POSE_THRESHOLDS = {
    "5deg2cm": (5.0, 2.0),
    "5deg5cm": (5.0, 5.0),
    "10deg2cm": (10.0, 2.0),
    "10deg5cm": (10.0, 5.0),
}
DEFAULT_GRIDS = {
    "iou": np.linspace(0.0, 1.0, 101),
    "rotation": np.linspace(0.0, 60.0, 61),
    "translation": np.linspace(0.0, 15.0, 61),
}


def _as_box(b) -> OrientedBox:
    return b.to_box() if isinstance(b, Pose9D) else b


def _signed_permutation(M: np.ndarray, tol: float = 1e-12):
    """Return the axis permutation if ``M`` is a signed permutation matrix."""
    absM = np.abs(M)
    perm = absM.argmax(axis=1)
    if sorted(perm.tolist()) != [0, 1, 2]:
        return None
    ideal = np.zeros((3, 3))
    ideal[np.arange(3), perm] = 1.0
    if np.abs(absM - ideal).max() > tol:
        return None
    return perm


def aligned_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Exact IoU of two boxes whose frames differ by a signed axis permutation."""
    a, b = _as_box(a), _as_box(b)
    M = a.rotation.T @ b.rotation
    perm = _signed_permutation(M)
    if perm is None:
        raise ValueError("boxes do not share an axis-aligned frame")
    ext_b = np.empty(3)
    ext_b[np.arange(3)] = b.extents[perm]
    c = a.rotation.T @ (b.center - a.center)
    lo = np.maximum(-a.extents / 2, c - ext_b / 2)
    hi = np.minimum(a.extents / 2, c + ext_b / 2)
    inter = float(np.prod(np.clip(hi - lo, 0.0, None)))
    union = a.volume + b.volume - inter
    return inter / union


def box_iou_3d(a, b, resolution: int = DEFAULT_RESOLUTION, method: str = "auto") -> float:
    """3D IoU of two oriented boxes.

    ``method="sampled"`` splits the AABB of both boxes' corners into
    ``resolution**3`` cells and tests one sample per cell, placed at a fixed
    pseudo-random offset inside it. Pure cell centers alias badly when a
    face falls between two rows of centers; jittering keeps the estimate
    deterministic while letting those boundary errors cancel. The samples
    depend only on the pair, so the estimate is symmetric in ``a`` and
    ``b``. ``"auto"`` uses the exact formula when the frames are
    axis-aligned with each other.
    """
    a, b = _as_box(a), _as_box(b)
    if method not in ("auto", "sampled", "exact"):
        raise ValueError(f"unknown method {method!r}")
    if method == "exact" or (method == "auto" and _signed_permutation(a.rotation.T @ b.rotation) is not None):
        return aligned_iou(a, b)

    corners = np.vstack([a.corners(), b.corners()])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    # (3, n) samples, transposed so the per-box test runs on contiguous rows
    pts = lo[:, None] + _unit_lattice(resolution) * (hi - lo)[:, None]
    in_a, in_b = _inside(a, pts), _inside(b, pts)
    union = np.count_nonzero(in_a | in_b)
    if union == 0:
        return 0.0
    return np.count_nonzero(in_a & in_b) / union


@lru_cache(maxsize=4)
def _unit_lattice(resolution: int) -> np.ndarray:
    """(3, n) array: one jittered sample per cell of a ``resolution**3`` grid on the unit cube."""
    if resolution < 1:
        raise ValueError("resolution must be positive")
    rng = np.random.default_rng(LATTICE_SEED)
    cells = np.indices((resolution,) * 3).reshape(3, -1).T
    pts = np.ascontiguousarray(((cells + rng.random(cells.shape)) / resolution).T)
    pts.setflags(write=False)
    return pts


def _inside(box: OrientedBox, pts: np.ndarray) -> np.ndarray:
    local = box.rotation.T @ pts
    local -= (box.center @ box.rotation)[:, None]
    np.abs(local, out=local)
    return (local <= box.extents[:, None] / 2.0).all(axis=0)


def rotation_error(Ra, Rb, sym: SymmetryTag = NO_SYMMETRY) -> float:
    """Rotation error in degrees, minimized over the symmetry orbit.

    Angles come from ``atan2(sin, cos)``, which stays accurate near zero
    where ``arccos`` of a rounded cosine does not.
    """
    Ra = np.asarray(Ra, dtype=float)
    Rb = np.asarray(Rb, dtype=float)
    if sym.symmetry == "axial-y":
        ya, yb = Ra[:, 1], Rb[:, 1]
        cos, sin = float(ya @ yb), float(np.linalg.norm(np.cross(ya, yb)))
        return float(np.degrees(np.arctan2(sin, cos)))
    return float(np.degrees(rotation_angle(Ra, Rb)))


@dataclass(frozen=True)
class PoseError:
    rotation: float
    translation: float
    iou: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rotation <= 180.0 + 1e-9:
            raise ValueError(f"rotation error {self.rotation} outside [0, 180]")
        if self.translation < 0:
            raise ValueError("translation error must be non-negative")

    def to_dict(self) -> dict:
        return {"rotation_deg": self.rotation, "translation_cm": self.translation, "iou": self.iou}


def pose_error(pred: Pose9D, gt: Pose9D, sym: SymmetryTag = NO_SYMMETRY,
               resolution: int = DEFAULT_RESOLUTION) -> PoseError:
    """Rotation (deg), translation (cm) and box IoU of a prediction.

    For axial-y symmetry the IoU is taken after turning the prediction about
    its y axis to best match the ground truth, as box orientation about that
    axis is undefined.
    """
    rot = rotation_error(pred.rotation, gt.rotation, sym)
    trans = 100.0 * float(np.linalg.norm(pred.translation - gt.translation))
    pred_R = pred.rotation
    if sym.symmetry == "axial-y":
        pred_R = _align_about_y(pred.rotation, gt.rotation)
    iou = box_iou_3d(OrientedBox(pred.translation, pred_R, pred.size), gt.to_box(), resolution)
    return PoseError(rot, trans, iou)


def _align_about_y(Rp: np.ndarray, Rg: np.ndarray) -> np.ndarray:
    """Rotate ``Rp`` about its own y axis to best match ``Rg``."""
    # Rp @ Rot_y(a): maximize trace(Rg^T Rp Rot_y(a)) over a
    M = Rg.T @ Rp
    a = np.arctan2(M[2, 0] - M[0, 2], M[0, 0] + M[2, 2])
    c, s = np.cos(a), np.sin(a)
    Ry = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    return Rp @ Ry


def _check(errors) -> List[PoseError]:
    errors = list(errors)
    if not errors:
        raise EmptyInput("no pose errors given")
    return errors


def threshold_metric(errors: Iterable[PoseError], rot_thresh: float, trans_thresh: float) -> float:
    """Fraction of predictions under both thresholds (degrees, cm)."""
    errors = _check(errors)
    if rot_thresh <= 0 or trans_thresh <= 0:
        raise ValueError("thresholds must be positive")
    ok = sum(1 for e in errors if e.rotation < rot_thresh and e.translation < trans_thresh)
    return ok / len(errors)


def iou_metric(errors: Iterable[PoseError], thresh: float) -> float:
    errors = _check(errors)
    return sum(1 for e in errors if e.iou > thresh) / len(errors)


def map_sweep(errors: Iterable[PoseError], axis: str, grid: Sequence[float]) -> np.ndarray:
    """Precision at every threshold of ``grid`` (ascending).

    Rotation and translation sweeps count ``error < tau``; the IoU sweep
    counts ``iou > tau`` and so is non-increasing along an ascending grid.
    """
    errors = _check(errors)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise EmptyInput("empty threshold grid")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    if axis == "rotation":
        vals = np.array([e.rotation for e in errors])
        return (vals[None, :] < grid[:, None]).mean(axis=1)
    if axis == "translation":
        vals = np.array([e.translation for e in errors])
        return (vals[None, :] < grid[:, None]).mean(axis=1)
    if axis == "iou":
        vals = np.array([e.iou for e in errors])
        return (vals[None, :] > grid[:, None]).mean(axis=1)
    raise ValueError(f"unknown sweep axis {axis!r}")


@dataclass
class MetricReport:
    """Per-category and mean precisions plus sweep curves."""

    precisions: Dict[str, Dict[str, float]] = field(default_factory=dict)
    curves: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)
    grids: Dict[str, List[float]] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_errors(cls, errors_by_category: Dict[str, Sequence[PoseError]],
                    grids: Dict[str, Sequence[float]] | None = None) -> "MetricReport":
        grids = DEFAULT_GRIDS if grids is None else grids
        report = cls(grids={k: [float(x) for x in v] for k, v in grids.items()})
        cats = sorted(errors_by_category)
        if not cats:
            raise EmptyInput("no categories to report")
        for cat in cats:
            errs = _check(errors_by_category[cat])
            row = {name: iou_metric(errs, t) for name, t in IOU_THRESHOLDS.items()}
            row.update({name: threshold_metric(errs, r, t) for name, (r, t) in POSE_THRESHOLDS.items()})
            report.precisions[cat] = row
            report.counts[cat] = len(errs)
            report.curves[cat] = {ax: map_sweep(errs, ax, g).tolist() for ax, g in grids.items()}
        keys = list(report.precisions[cats[0]])
        report.precisions["mean"] = {k: float(np.mean([report.precisions[c][k] for c in cats])) for k in keys}
        report.curves["mean"] = {
            ax: np.mean([report.curves[c][ax] for c in cats], axis=0).tolist() for ax in grids
        }
        return report

    def to_dict(self) -> dict:
        return {"precisions": self.precisions, "counts": self.counts, "grids": self.grids, "curves": self.curves}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["category", "metric", "precision"])
        for cat, row in self.precisions.items():
            for k, v in row.items():
                w.writerow([cat, k, repr(float(v))])
        return buf.getvalue()

    def curves_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["category", "axis", "threshold", "precision"])
        for cat, curves in self.curves.items():
            for ax, vals in curves.items():
                for t, p in zip(self.grids[ax], vals):
                    w.writerow([cat, ax, repr(float(t)), repr(float(p))])
        return buf.getvalue()
