"""Residual-field losses with Laplacian uncertainty, consistency and total loss.

Both owned losses reduce over valid (point, face) entries, either as a raw
sum or (default) as a mean so values do not depend on the point count.
Analytic gradients are provided alongside for finite-difference checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Mapping, Sequence

import numpy as np

from bboxpose.errors import KinkProximity, MaskMismatch, NonFinite, NonPositiveSigma
from bboxpose.projection import ProjectionField, SprvField

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class LossWeights:
    lambda0: float = 0.01
    lambda1: float = 8.0
    lambda2: float = 10.0
    lambda3: float = 3.0
    lambda4: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be non-negative")

    def scaled(self, k: float) -> "LossWeights":
        return LossWeights(*(k * getattr(self, f.name) for f in fields(self)))


def _arrays(pred, gt):
    """(N, 6, 3) arrays and the shared (6,) mask of two residual fields."""
    if isinstance(pred, SprvField):
        a, ma = pred.residuals, pred.mask
    elif isinstance(pred, ProjectionField):
        a, ma = pred.vectors, pred.mask
    else:
        a, ma = np.asarray(pred, dtype=float), np.ones(6, bool)
    if isinstance(gt, SprvField):
        b, mb = gt.residuals, gt.mask
    elif isinstance(gt, ProjectionField):
        b, mb = gt.vectors, gt.mask
    else:
        b, mb = np.asarray(gt, dtype=float), np.ones(6, bool)
    if a.shape != b.shape or not np.array_equal(ma, mb):
        raise MaskMismatch(f"shapes {a.shape} vs {b.shape}, masks {ma.tolist()} vs {mb.tolist()}")
    return a, b, ma


def _sigmas(sigma) -> np.ndarray:
    s = np.broadcast_to(np.asarray(sigma, dtype=float), (6,)).copy()
    if not np.all(s > 0):
        raise NonPositiveSigma(f"sigma must be positive, got {s.tolist()}")
    return s


def _norm(reduction: str, count: int) -> float:
    if reduction == "sum":
        return 1.0
    if reduction == "mean":
        return 1.0 / max(count, 1)
    raise ValueError(f"unknown reduction {reduction!r}")


def sprv_loss(pred, gt, sigma_data=1.0, sigma_reg=1.0, lambda0: float = 0.01,
              reduction: str = "mean") -> float:
    """Laplacian-uncertainty loss on predicted residuals.

    Per valid entry ``sqrt(2)/sigma_j * |pred - gt|_1 + log(sigma_j)``, plus
    ``lambda0`` times the same form on ``|pred|_1`` with ``sigma_reg``.
    ``sigma_*`` hold one value per face (scalars broadcast).
    """
    a, b, mask = _arrays(pred, gt)
    sd, sr = _sigmas(sigma_data), _sigmas(sigma_reg)
    l1 = np.abs(a - b).sum(-1)[:, mask]
    l1_reg = np.abs(a).sum(-1)[:, mask]
    sd, sr = sd[mask], sr[mask]
    data = (SQRT2 / sd * l1 + np.log(sd)).sum()
    reg = (SQRT2 / sr * l1_reg + np.log(sr)).sum()
    return float((data + lambda0 * reg) * _norm(reduction, l1.size))


def sprv_loss_grad(pred, gt, sigma_data=1.0, sigma_reg=1.0, lambda0: float = 0.01,
                   reduction: str = "mean") -> dict:
    """Gradients of :func:`sprv_loss` w.r.t. ``pred``, ``sigma_data`` and ``sigma_reg``."""
    a, b, mask = _arrays(pred, gt)
    sd, sr = _sigmas(sigma_data), _sigmas(sigma_reg)
    n = a.shape[0]
    k = _norm(reduction, n * int(mask.sum()))
    m3 = mask[None, :, None]
    g_pred = SQRT2 / sd[None, :, None] * np.sign(a - b) + lambda0 * SQRT2 / sr[None, :, None] * np.sign(a)
    g_pred = np.where(m3, g_pred, 0.0) * k
    l1 = np.abs(a - b).sum(-1).sum(0)
    l1_reg = np.abs(a).sum(-1).sum(0)
    g_sd = np.where(mask, -SQRT2 * l1 / sd**2 + n / sd, 0.0) * k
    g_sr = np.where(mask, lambda0 * (-SQRT2 * l1_reg / sr**2 + n / sr), 0.0) * k
    return {"pred": g_pred, "sigma_data": g_sd, "sigma_reg": g_sr}


def recover_field(hypothesis: ProjectionField, residual: SprvField) -> ProjectionField:
    """Hypothesis plus predicted residual."""
    return hypothesis + residual


def consistency_loss(from_pose, from_sprv, reduction: str = "mean") -> float:
    """l1 distance between the pose-derived field and the residual-recovered field."""
    a, b, mask = _arrays(from_pose, from_sprv)
    d = np.abs(a - b)[:, mask]
    return float(d.sum() * _norm(reduction, d.shape[0] * d.shape[1]))


def consistency_loss_grad(from_pose, from_sprv, reduction: str = "mean") -> dict:
    a, b, mask = _arrays(from_pose, from_sprv)
    k = _norm(reduction, a.shape[0] * int(mask.sum()))
    g = np.where(mask[None, :, None], np.sign(a - b), 0.0) * k
    return {"from_pose": g, "from_sprv": -g}


def total_loss(pose: float, shape: float, sprv: float, con: float,
               weights: LossWeights = LossWeights()) -> float:
    comps = np.array([pose, shape, sprv, con], dtype=float)
    if not np.all(np.isfinite(comps)):
        raise NonFinite(f"loss components must be finite, got {comps.tolist()}")
    w = np.array([weights.lambda1, weights.lambda2, weights.lambda3, weights.lambda4])
    return float(w @ comps)


def numeric_gradient_check(loss: Callable[..., float], grad: Callable[..., Mapping[str, np.ndarray]],
                           inputs: Mapping[str, np.ndarray], eps: float = 1e-6,
                           kinks: Sequence[np.ndarray] = (), wrt: Sequence[str] | None = None,
                           floor: float = 1e-8) -> float:
    """Largest relative disagreement between analytic and central-difference gradients.

    ``loss`` and ``grad`` take the same keyword arguments; ``grad`` returns a
    dict keyed by argument name. ``kinks`` lists arrays whose entries feed an
    absolute value and so must stay more than ``10 * eps`` from zero.
    """
    for arr in kinks:
        arr = np.asarray(arr, dtype=float)
        if arr.size and np.abs(arr).min() <= 10 * eps:
            raise KinkProximity(f"an l1 argument is within {10 * eps:g} of zero")
    inputs = {k: np.array(v, dtype=float) for k, v in inputs.items()}
    analytic = grad(**inputs)
    names = list(analytic) if wrt is None else list(wrt)
    worst = 0.0
    for name in names:
        x = inputs[name]
        g = np.asarray(analytic[name], dtype=float)
        num = np.zeros_like(x)
        flat, nflat = x.reshape(-1), num.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = loss(**inputs)
            flat[i] = orig - eps
            fm = loss(**inputs)
            flat[i] = orig
            nflat[i] = (fp - fm) / (2 * eps)
        denom = np.maximum(np.maximum(np.abs(g), np.abs(num)), floor)
        worst = max(worst, float((np.abs(g - num) / denom).max()))
    return worst
