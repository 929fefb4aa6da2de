"""Harness configuration.

A config file (JSON or YAML) is a mapping whose keys mirror the dataclasses
below; nested sections are nested mappings. Unknown keys and out-of-range
values raise :class:`ConfigError` naming the dotted key.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple

from bboxpose.errors import ConfigError
from bboxpose.harness.shapes import CATEGORIES
from bboxpose.projection import DEFAULT_SYMMETRY, SYMMETRY_TYPES


@dataclass
class PoseSampling:
    distance: Tuple[float, float] = (0.5, 1.5)
    lateral: float = 0.3
    upright: bool = False


@dataclass
class AugmentConfig:
    method: str = "none"
    gamma_max: Tuple[float, float] = (1.0, 1.3)
    gamma_min: Tuple[float, float] = (0.7, 1.0)
    gamma: Tuple[float, float] = (0.8, 1.2)
    hinge_deg: Tuple[float, float] = (-30.0, 30.0)
    linear: Tuple[float, float] = (0.8, 1.2)
    noise_sigma: float = 0.0
    rot_jitter_deg: float = 0.0
    trans_jitter: float = 0.0


@dataclass
class HypothesisConfig:
    prior: str = "category"
    size_source: str = "mean"
    rotation_noise_deg: float = 0.0
    coords: str = "exact"


@dataclass
class LossConfig:
    sigma_data: float = 1.0
    sigma_reg: float = 1.0
    reduction: str = "mean"
    lambda0: float = 0.01
    lambda1: float = 8.0
    lambda2: float = 10.0
    lambda3: float = 3.0
    lambda4: float = 1.0


@dataclass
class DecodeConfig:
    field_noise: float = 0.0


@dataclass
class EvalConfig:
    iou_resolution: int = 50


@dataclass
class HarnessConfig:
    seed: int = 0
    categories: List[str] = field(default_factory=lambda: list(CATEGORIES))
    instances_per_category: int = 10
    n_points: int = 1024
    n_model: int = 1024
    shape_variation: float = 0.2
    observation: str = "surface"
    pose: PoseSampling = field(default_factory=PoseSampling)
    symmetry: Dict[str, str] = field(default_factory=lambda: dict(DEFAULT_SYMMETRY))
    augmentation: AugmentConfig = field(default_factory=AugmentConfig)
    hypothesis: HypothesisConfig = field(default_factory=HypothesisConfig)
    losses: LossConfig = field(default_factory=LossConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    dump_fields: bool = False

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_CHOICES = {
    "observation": ("surface", "depth"),
    "augmentation.method": ("none", "a1", "a2", "linear", "auto"),
    "hypothesis.prior": ("category", "instance"),
    "hypothesis.size_source": ("mean", "true"),
    "hypothesis.coords": ("exact", "nearest"),
    "losses.reduction": ("mean", "sum"),
}


def _build(cls, data, prefix=""):
    if not isinstance(data, dict):
        raise ConfigError(prefix.rstrip(".") or "<root>", "expected a mapping")
    known = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        dotted = prefix + key
        if key not in known:
            raise ConfigError(dotted, "unknown key")
        default = known[key].default
        if default is dataclasses.MISSING:
            default = known[key].default_factory()
        if dataclasses.is_dataclass(default):
            kwargs[key] = _build(type(default), value, dotted + ".")
        elif isinstance(default, dict):
            if not isinstance(value, dict):
                raise ConfigError(dotted, "expected a mapping")
            kwargs[key] = {**default, **value}
        elif isinstance(default, tuple):
            if not isinstance(value, (list, tuple)) or len(value) != len(default):
                raise ConfigError(dotted, f"expected a list of {len(default)} numbers")
            kwargs[key] = tuple(float(v) for v in value)
        elif isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(dotted, "expected true or false")
            kwargs[key] = value
        elif isinstance(default, (int, float)):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(dotted, "expected a number")
            if isinstance(default, int) and not isinstance(default, bool):
                if int(value) != value:
                    raise ConfigError(dotted, "expected an integer")
                value = int(value)
            kwargs[key] = type(default)(value)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def validate(cfg: HarnessConfig) -> HarnessConfig:
    for dotted, choices in _CHOICES.items():
        obj = cfg
        for part in dotted.split("."):
            obj = getattr(obj, part)
        if obj not in choices:
            raise ConfigError(dotted, f"must be one of {list(choices)}, got {obj!r}")
    if not isinstance(cfg.categories, list) or not cfg.categories:
        raise ConfigError("categories", "expected a non-empty list")
    for cat in cfg.categories:
        if cat not in CATEGORIES:
            raise ConfigError("categories", f"unknown category {cat!r}")
    for cat, sym in cfg.symmetry.items():
        if sym not in SYMMETRY_TYPES:
            raise ConfigError(f"symmetry.{cat}", f"must be one of {list(SYMMETRY_TYPES)}")
    if cfg.instances_per_category < 1:
        raise ConfigError("instances_per_category", "must be >= 1")
    if cfg.n_points < 3:
        raise ConfigError("n_points", "must be >= 3")
    if cfg.n_model < 8:
        raise ConfigError("n_model", "must be >= 8")
    # larger variations can push camera lens, mug handle or bowl depth out of their bodies
    if not 0 <= cfg.shape_variation <= 0.23:
        raise ConfigError("shape_variation", "must lie in [0, 0.23]")
    a = cfg.augmentation
    for key in ("noise_sigma", "rot_jitter_deg", "trans_jitter"):
        if getattr(a, key) < 0:
            raise ConfigError(f"augmentation.{key}", "must be non-negative")
    if not a.gamma_max[0] >= 1.0 or not a.gamma_min[1] <= 1.0:
        raise ConfigError("augmentation", "gamma_min range must be <= 1 <= gamma_max range")
    for key in ("sigma_data", "sigma_reg"):
        if getattr(cfg.losses, key) <= 0:
            raise ConfigError(f"losses.{key}", "must be positive")
    if cfg.decode.field_noise < 0:
        raise ConfigError("decode.field_noise", "must be non-negative")
    if cfg.eval.iou_resolution < 2:
        raise ConfigError("eval.iou_resolution", "must be >= 2")
    return cfg


def config_from_dict(data: dict) -> HarnessConfig:
    return validate(_build(HarnessConfig, data or {}))


def load_config(path) -> HarnessConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from exc
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:
        raise ConfigError("--config", f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)
