"""Shape-prior adaptation: deformed model, soft assignment and NOCS boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bboxpose.errors import DegenerateModel, RowNotNormalized, ShapeMismatch

ROW_SUM_TOL = 1e-6


@dataclass
class ShapePriorModel:
    """Prior points, per-point deformation and observed-to-model assignment."""

    prior: np.ndarray
    deformation: np.ndarray
    assignment: np.ndarray

    def __post_init__(self):
        self.prior = np.asarray(self.prior, dtype=float)
        self.deformation = np.asarray(self.deformation, dtype=float)
        self.assignment = np.asarray(self.assignment, dtype=float)
        if self.assignment.shape[1] != self.prior.shape[0]:
            raise ShapeMismatch(
                f"assignment has {self.assignment.shape[1]} columns for {self.prior.shape[0]} prior points"
            )

    @property
    def model(self) -> np.ndarray:
        return reconstruct_model(self.prior, self.deformation)

    def coords(self) -> np.ndarray:
        return assign_coords(self.assignment, self.model)


def reconstruct_model(prior, deformation) -> np.ndarray:
    prior = np.asarray(prior, dtype=float)
    deformation = np.asarray(deformation, dtype=float)
    if prior.shape != deformation.shape:
        raise ShapeMismatch(f"prior {prior.shape} vs deformation {deformation.shape}")
    return prior + deformation


def check_assignment(assignment, tol: float = ROW_SUM_TOL) -> None:
    A = np.asarray(assignment, dtype=float)
    if np.any(A < 0):
        raise RowNotNormalized("assignment has negative entries")
    dev = np.abs(A.sum(axis=1) - 1.0)
    if dev.size and dev.max() > tol:
        row = int(dev.argmax())
        raise RowNotNormalized(f"row {row} sums to {A[row].sum():.9g}")


def assign_coords(assignment, model) -> np.ndarray:
    """NOCS coordinates of observed points as convex combinations of the model."""
    A = np.asarray(assignment, dtype=float)
    model = np.asarray(model, dtype=float)
    if A.ndim != 2 or A.shape[1] != model.shape[0]:
        raise ShapeMismatch(f"assignment {A.shape} vs model {model.shape}")
    check_assignment(A)
    return A @ model


def row_normalize(logits) -> np.ndarray:
    """Row-wise softmax, the usual way a raw assignment becomes row-normalized."""
    z = np.asarray(logits, dtype=float)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def nearest_assignment(coords, model) -> np.ndarray:
    """One-hot rows picking the closest model point for every coordinate."""
    coords = np.asarray(coords, dtype=float)
    model = np.asarray(model, dtype=float)
    d2 = ((coords[:, None, :] - model[None, :, :]) ** 2).sum(-1)
    A = np.zeros((coords.shape[0], model.shape[0]))
    A[np.arange(coords.shape[0]), d2.argmin(axis=1)] = 1.0
    return A


def canonical_bbox(model, tol: float = 1e-9):
    """Axis-aligned NOCS box of the model from its outermost points.

    Returns ``(size, center)``.
    """
    model = np.asarray(model, dtype=float)
    if model.ndim != 2 or model.shape[0] < 2:
        raise DegenerateModel("need at least two model points")
    lo, hi = model.min(axis=0), model.max(axis=0)
    size = hi - lo
    if np.any(size < tol):
        raise DegenerateModel(f"zero extent on axis {'xyz'[int(size.argmin())]}")
    return size, (hi + lo) / 2.0


@dataclass(frozen=True)
class BoxCheck:
    contained: bool
    slack_low: np.ndarray
    slack_high: np.ndarray

    @property
    def slack(self) -> np.ndarray:
        """Per-axis shrinkage of the coordinate box relative to the model box."""
        return self.slack_low + self.slack_high

    def __bool__(self):
        return self.contained


def shared_bbox_check(model, coords, assignment=None) -> BoxCheck:
    """Whether the box of ``coords`` lies inside the box of ``model``.

    For row-normalized non-negative assignments this always holds, and the
    two boxes coincide only when the extreme model points get full weight
    in some row. ``assignment`` is only validated.
    """
    model = np.asarray(model, dtype=float)
    coords = np.asarray(coords, dtype=float)
    if assignment is not None:
        check_assignment(assignment)
    lo_m, hi_m = model.min(axis=0), model.max(axis=0)
    lo_c, hi_c = coords.min(axis=0), coords.max(axis=0)
    slack_low = lo_c - lo_m
    slack_high = hi_m - hi_c
    # convex combinations can round a hair outside the hull
    tol = 1e-12 * max(1.0, float(np.abs(model).max()))
    contained = bool(np.all(slack_low >= -tol) and np.all(slack_high >= -tol))
    return BoxCheck(contained, slack_low, slack_high)
