"""Synthetic instances: posed parametric shapes with exact ground truth."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence, Tuple

import numpy as np

from bboxpose.errors import UnknownCategory
from bboxpose.geometry import Pose9D, random_rotation, rot_x, rot_y, rot_z
from bboxpose.harness.camera import REAL275, CameraIntrinsics, backproject, render_depth
from bboxpose.harness.shapes import CATEGORIES, sample_surface, shape_params
from bboxpose.projection import SymmetryTag

PRIOR_SEED = 20220701
PRIOR_POINTS = 1024


@dataclass
class SyntheticInstance:
    category: str
    params: dict
    model: np.ndarray  # (M, 3) NOCS
    pose: Pose9D
    observed: np.ndarray  # (N, 3) camera frame
    sym: SymmetryTag
    seed: int
    model_labels: Optional[np.ndarray] = None
    observed_labels: Optional[np.ndarray] = None
    hinge: Optional[Tuple[float, float]] = None  # canonical metric (a_x, a_y)

    @property
    def nocs(self) -> np.ndarray:
        """Exact NOCS coordinates of the observed points."""
        return (self.observed - self.pose.translation) @ self.pose.rotation / self.pose.diagonal

    @property
    def canonical_model(self) -> np.ndarray:
        """Model points in the metric canonical frame."""
        return self.model * self.pose.diagonal


def instance_seed(base_seed: int, category: str, index: int) -> int:
    ss = np.random.SeedSequence([int(base_seed), CATEGORIES.index(category), int(index)])
    return int(ss.generate_state(1)[0])


def sample_pose(rng: np.random.Generator, size, distance=(0.5, 1.5), lateral: float = 0.3,
                upright: bool = False) -> Pose9D:
    if upright:
        # camera looking down at a table: spin about y, then tilt toward the camera
        R = rot_x(rng.uniform(np.pi / 2, np.pi * 0.9)) @ rot_y(rng.uniform(0, 2 * np.pi))
        R = rot_z(rng.uniform(-0.2, 0.2)) @ R
    else:
        R = random_rotation(rng)
    t = np.array([rng.uniform(-lateral, lateral), rng.uniform(-lateral, lateral), rng.uniform(*distance)])
    return Pose9D(R, t, size)


def _depth_observation(category, params, pose, n, rng, K: CameraIntrinsics):
    dense = sample_surface(category, params, max(40 * n, 20000), rng, anchors=False)
    cam = pose.transform(dense.points)
    depth, mask = render_depth(cam, K, 480, 640)
    pts = backproject(depth, mask, K)
    pick = rng.choice(len(pts), n, replace=len(pts) < n)
    pts = pts[pick]
    labels = None
    if dense.labels is not None:
        from scipy.spatial import cKDTree

        canon = (pts - pose.translation) @ pose.rotation
        labels = dense.labels[cKDTree(dense.points).query(canon)[1]]
    return pts, labels


def generate_instance(category: str, seed: int, scale: Optional[Sequence[float]] = None,
                      shape_variation: float = 0.2, params: Optional[dict] = None,
                      pose: Optional[Pose9D] = None, n_points: int = 1024, n_model: int = 1024,
                      observation: str = "surface", sym: Optional[SymmetryTag] = None,
                      pose_kwargs: Optional[dict] = None,
                      intrinsics: CameraIntrinsics = REAL275) -> SyntheticInstance:
    """Draw one posed instance.

    ``scale`` (per-axis multipliers of the category's default shape) is
    drawn from ``U(1 - shape_variation, 1 + shape_variation)`` unless
    given; ``params`` overrides individual shape parameters. The model is
    returned in NOCS, the observation in the camera frame.
    """
    if category not in CATEGORIES:
        raise UnknownCategory(f"unknown category {category!r}")
    rng = np.random.default_rng(seed)
    if scale is None:
        scale = rng.uniform(1 - shape_variation, 1 + shape_variation, 3)
    p = shape_params(category, scale, params)
    model = sample_surface(category, p, n_model, rng, anchors=True)
    if pose is None:
        pose = sample_pose(rng, model.size, **(pose_kwargs or {}))
    else:
        pose = Pose9D(pose.rotation, pose.translation, model.size)
    if observation == "surface":
        obs = sample_surface(category, p, n_points, rng, anchors=False)
        observed, observed_labels = pose.transform(obs.points), obs.labels
    elif observation == "depth":
        observed, observed_labels = _depth_observation(category, p, pose, n_points, rng, intrinsics)
    else:
        raise ValueError(f"unknown observation mode {observation!r}")
    return SyntheticInstance(
        category=category,
        params=p,
        model=model.points / pose.diagonal,
        pose=pose,
        observed=observed,
        sym=sym if sym is not None else SymmetryTag.for_category(category),
        seed=int(seed),
        model_labels=model.labels,
        observed_labels=observed_labels,
        hinge=model.hinge,
    )


def build_prior(category: str, n: int = PRIOR_POINTS, seed: int = PRIOR_SEED) -> np.ndarray:
    """Mean-shape prior in NOCS: the default shape scaled by its diagonal."""
    rng = np.random.default_rng([seed, CATEGORIES.index(category)])
    surf = sample_surface(category, shape_params(category), n, rng, anchors=True)
    return surf.points / np.linalg.norm(surf.size)


def load_prior(category: str) -> np.ndarray:
    """Bundled prior fixture for ``category``."""
    if category not in CATEGORIES:
        raise UnknownCategory(f"unknown category {category!r}")
    ref = resources.files("bboxpose.data").joinpath("priors", f"{category}.json")
    doc = json.loads(ref.read_text())
    return np.asarray(doc["points"], dtype=float)
