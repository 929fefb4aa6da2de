"""Parametric canonical shapes for the six NOCS categories.

Shapes live in a metric canonical frame with y up and the bounding box
centered at the origin. Each sampler draws area-uniform surface points and
can prepend a few surface points that touch every box face, so the box of
a sampled model equals the analytic box exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from bboxpose.errors import UnknownCategory

CATEGORIES = ("bottle", "bowl", "camera", "can", "laptop", "mug")

# meters; loosely matched to REAL275 object sizes
DEFAULT_PARAMS: Dict[str, Dict[str, float]] = {
    "bottle": {"radius": 0.04, "height": 0.22, "neck_radius": 0.015, "neck_height": 0.06},
    "bowl": {"radius": 0.085, "depth": 0.05},
    "camera": {"body_x": 0.09, "body_y": 0.07, "body_z": 0.06, "lens_radius": 0.018, "lens_length": 0.05},
    "can": {"radius": 0.033, "height": 0.12},
    "laptop": {"base_depth": 0.22, "lid_length": 0.2, "width": 0.32, "opening_deg": 110.0},
    "mug": {"radius": 0.045, "height": 0.1, "handle_radius": 0.025, "handle_tube": 0.006},
}

# parameters that scale with object size; angles are left alone
_LENGTH_KEYS = {
    "bottle": {"radius": 0, "neck_radius": 0, "height": 1, "neck_height": 1},
    "bowl": {"radius": 0, "depth": 1},
    "camera": {"body_x": 0, "lens_length": 0, "body_y": 1, "body_z": 2, "lens_radius": 1},
    "can": {"radius": 0, "height": 1},
    "laptop": {"base_depth": 0, "lid_length": 1, "width": 2},
    "mug": {"radius": 0, "handle_radius": 0, "handle_tube": 0, "height": 1},
}


@dataclass
class Surface:
    """Sampled canonical shape plus optional part labels (laptop lid)."""

    points: np.ndarray
    size: np.ndarray
    labels: Optional[np.ndarray] = None
    hinge: Optional[Tuple[float, float]] = None


Part = Tuple[float, Callable[[np.random.Generator, int], np.ndarray], int]


def _cyl_side(r, y0, y1):
    def sample(rng, n):
        a = rng.uniform(0, 2 * np.pi, n)
        y = rng.uniform(y0, y1, n)
        return np.column_stack([r * np.cos(a), y, r * np.sin(a)])
    return 2 * np.pi * r * (y1 - y0), sample


def _disk(r, y, r_in=0.0):
    def sample(rng, n):
        a = rng.uniform(0, 2 * np.pi, n)
        rho = np.sqrt(rng.uniform(r_in**2, r**2, n))
        return np.column_stack([rho * np.cos(a), np.full(n, y), rho * np.sin(a)])
    return np.pi * (r**2 - r_in**2), sample


def _rect(origin, e1, e2):
    origin, e1, e2 = (np.asarray(v, dtype=float) for v in (origin, e1, e2))

    def sample(rng, n):
        uv = rng.uniform(0, 1, (n, 2))
        return origin + uv[:, :1] * e1 + uv[:, 1:] * e2
    return float(np.linalg.norm(np.cross(e1, e2))), sample


def _box_faces(lo, hi) -> List:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    d = hi - lo
    ex, ey, ez = np.diag(d)
    return [
        _rect(lo, ey, ez), _rect(lo + ex, ey, ez),
        _rect(lo, ex, ez), _rect(lo + ey, ex, ez),
        _rect(lo, ex, ey), _rect(lo + ez, ex, ey),
    ]


def _sphere_cap(rho, y_lo, y_hi):
    # area on a sphere is uniform in height
    def sample(rng, n):
        y = rng.uniform(y_lo, y_hi, n)
        a = rng.uniform(0, 2 * np.pi, n)
        rr = np.sqrt(np.clip(rho**2 - y**2, 0.0, None))
        return np.column_stack([rr * np.cos(a), y, rr * np.sin(a)])
    return 2 * np.pi * rho * (y_hi - y_lo), sample


def _torus_arc(center, major, minor, a0, a1):
    cx, cy = center

    def sample(rng, n):
        out = np.empty((0, 3))
        while out.shape[0] < n:
            m = 2 * (n - out.shape[0]) + 8
            u = rng.uniform(a0, a1, m)
            v = rng.uniform(0, 2 * np.pi, m)
            keep = rng.uniform(0, 1, m) < (major + minor * np.cos(v)) / (major + minor)
            u, v = u[keep], v[keep]
            ring = major + minor * np.cos(v)
            pts = np.column_stack([cx + ring * np.cos(u), cy + ring * np.sin(u), minor * np.sin(v)])
            out = np.vstack([out, pts])
        return out[:n]
    return (a1 - a0) * major * 2 * np.pi * minor, sample


def _sample_parts(parts, rng, n) -> Tuple[np.ndarray, np.ndarray]:
    areas = np.array([p[0] for p in parts])
    counts = rng.multinomial(n, areas / areas.sum())
    pts, ids = [], []
    for i, ((_, sampler), k) in enumerate(zip(parts, counts)):
        if k:
            pts.append(sampler(rng, k))
            ids.append(np.full(k, i))
    return np.vstack(pts), np.concatenate(ids)


def _bottle(p):
    r, h, nr, nh = p["radius"], p["height"], p["neck_radius"], p["neck_height"]
    y0, y1, y2 = -h / 2, h / 2 - nh, h / 2
    parts = [_cyl_side(r, y0, y1), _disk(r, y0), _disk(r, y1, nr), _cyl_side(nr, y1, y2), _disk(nr, y2)]
    anchors = [(r, 0.5 * (y0 + y1), 0), (-r, 0.5 * (y0 + y1), 0), (0, 0.5 * (y0 + y1), r),
               (0, 0.5 * (y0 + y1), -r), (0, y0, 0), (0, y2, 0)]
    return parts, anchors, np.array([2 * r, h, 2 * r]), None


def _can(p):
    r, h = p["radius"], p["height"]
    parts = [_cyl_side(r, -h / 2, h / 2), _disk(r, -h / 2), _disk(r, h / 2)]
    anchors = [(r, 0, 0), (-r, 0, 0), (0, 0, r), (0, 0, -r), (0, -h / 2, 0), (0, h / 2, 0)]
    return parts, anchors, np.array([2 * r, h, 2 * r]), None


def _bowl(p):
    r, d = p["radius"], p["depth"]
    if d > r:
        raise ValueError("bowl depth must not exceed its rim radius")
    rho = (r * r + d * d) / (2 * d)
    # cap spans sphere heights [-rho, -rho + d]; shift so the box is centered
    shift = rho - d / 2
    area, base = _sphere_cap(rho, -rho, -rho + d)

    def sample(rng, n):
        return base(rng, n) + np.array([0.0, shift, 0.0])
    top = d / 2
    anchors = [(r, top, 0), (-r, top, 0), (0, top, r), (0, top, -r), (0, -d / 2, 0)]
    return [(area, sample)], anchors, np.array([2 * r, d, 2 * r]), None


def _camera(p):
    bx, by, bz = p["body_x"], p["body_y"], p["body_z"]
    rl, ll = p["lens_radius"], p["lens_length"]
    if 2 * rl > min(by, bz):
        raise ValueError("lens must fit inside the body face")
    sx = bx + ll
    x0 = -sx / 2
    x1 = x0 + bx
    body = _box_faces((x0, -by / 2, -bz / 2), (x1, by / 2, bz / 2))

    def lens_side(rng, n):
        a = rng.uniform(0, 2 * np.pi, n)
        x = rng.uniform(x1, sx / 2, n)
        return np.column_stack([x, rl * np.cos(a), rl * np.sin(a)])

    def lens_cap(rng, n):
        a = rng.uniform(0, 2 * np.pi, n)
        rho = np.sqrt(rng.uniform(0, rl**2, n))
        return np.column_stack([np.full(n, sx / 2), rho * np.cos(a), rho * np.sin(a)])

    parts = body + [(2 * np.pi * rl * ll, lens_side), (np.pi * rl**2, lens_cap)]
    anchors = [(x0, 0, 0), (sx / 2, 0, 0), (x0, by / 2, 0), (x0, -by / 2, 0), (x0, 0, bz / 2), (x0, 0, -bz / 2)]
    return parts, anchors, np.array([sx, by, bz]), None


def _laptop(p):
    D, Ll, W = p["base_depth"], p["lid_length"], p["width"]
    alpha = np.radians(p["opening_deg"])
    if not 0 < alpha < np.pi:
        raise ValueError("opening angle must lie in (0, 180) degrees")
    lid = np.array([-np.cos(alpha), np.sin(alpha), 0.0]) * Ll
    xs = [0.0, -D, lid[0]]
    lo = np.array([min(xs), 0.0, -W / 2])
    hi = np.array([max(xs), lid[1], W / 2])
    c = (lo + hi) / 2
    hinge = -c
    base = _rect(hinge + (0, 0, -W / 2), (-D, 0, 0), (0, 0, W))
    top = _rect(hinge + (0, 0, -W / 2), lid, (0, 0, W))
    anchors = [hinge + (-D, 0, 0), hinge + (0, 0, W / 2), hinge + (0, 0, -W / 2),
               hinge + lid, hinge]
    return [base, top], anchors, hi - lo, (float(hinge[0]), float(hinge[1]))


def _mug(p):
    r, h, hr, ht = p["radius"], p["height"], p["handle_radius"], p["handle_tube"]
    if hr + ht > h / 2:
        raise ValueError("handle taller than the mug")
    sx = 2 * r + hr + ht
    cx = -sx / 2 + r
    side_a, side = _cyl_side(r, -h / 2, h / 2)
    bot_a, bot = _disk(r, -h / 2)
    off = np.array([cx, 0.0, 0.0])
    parts = [
        (side_a, lambda rng, n: side(rng, n) + off),
        (bot_a, lambda rng, n: bot(rng, n) + off),
        _torus_arc((cx + r, 0.0), hr, ht, -np.pi / 2, np.pi / 2),
    ]
    anchors = [(cx - r, 0, 0), (cx + r + hr + ht, 0, 0), (cx, 0, r), (cx, 0, -r), (cx, -h / 2, 0), (cx, h / 2, 0)]
    return parts, anchors, np.array([sx, h, 2 * r]), None


_BUILDERS = {
    "bottle": _bottle,
    "bowl": _bowl,
    "camera": _camera,
    "can": _can,
    "laptop": _laptop,
    "mug": _mug,
}


def shape_params(category: str, scale=(1.0, 1.0, 1.0), overrides: Optional[dict] = None) -> dict:
    """Default parameters scaled per axis, then overridden key by key."""
    if category not in _BUILDERS:
        raise UnknownCategory(f"unknown category {category!r}")
    p = dict(DEFAULT_PARAMS[category])
    for key, axis in _LENGTH_KEYS[category].items():
        p[key] *= float(scale[axis])
    if overrides:
        for key, value in overrides.items():
            if key not in p:
                raise KeyError(f"{category} has no parameter {key!r}")
            p[key] = float(value)
    return p


def analytic_size(category: str, params: dict) -> np.ndarray:
    if category not in _BUILDERS:
        raise UnknownCategory(f"unknown category {category!r}")
    return _BUILDERS[category](params)[2].astype(float)


def sample_surface(category: str, params: dict, n: int, rng: np.random.Generator,
                   anchors: bool = True) -> Surface:
    """``n`` surface points; the first few are box-touching anchors if requested."""
    if category not in _BUILDERS:
        raise UnknownCategory(f"unknown category {category!r}")
    parts, anch, size, hinge = _BUILDERS[category](params)
    anch = np.asarray(anch, dtype=float) if anchors else np.empty((0, 3))
    k = min(len(anch), n)
    pts, ids = _sample_parts(parts, rng, n - k)
    pts = np.vstack([anch[:k], pts]) if k else pts
    labels = None
    if category == "laptop":
        # part 1 is the lid; anchors at the hinge count as base
        lid_tip = np.zeros(k, bool)
        if k:
            lid_anchor = np.asarray(_laptop(params)[1][3])
            lid_tip = np.all(np.isclose(anch[:k], lid_anchor), axis=1)
        labels = np.concatenate([lid_tip, ids == 1])
    return Surface(pts, size, labels, hinge)
