"""Corpus generation and the on-disk corpus layout.

A corpus directory holds ``manifest.json`` and one observed cloud plus one
NOCS model per instance under ``instances/``. Manifest schema (version 1)::

    {
      "schema_version": 1,
      "seed": int,
      "config": {...},                      # HarnessConfig used to generate
      "mean_sizes": {category: [sx, sy, sz]},
      "instances": [
        {"id", "category", "symmetry", "seed", "params", "pose",
         "hinge", "observed", "model"}      # file names relative to the dir
      ]
    }
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from bboxpose.geometry import Pose9D
from bboxpose.harness.config import HarnessConfig
from bboxpose.harness.io import read_points, write_points
from bboxpose.harness.synth import SyntheticInstance, generate_instance, instance_seed
from bboxpose.projection import SymmetryTag

SCHEMA_VERSION = 1


@dataclass
class Corpus:
    instances: List[SyntheticInstance]
    ids: List[str]
    mean_sizes: Dict[str, np.ndarray]
    seed: int = 0
    config: dict = field(default_factory=dict)


def mean_sizes(instances) -> Dict[str, np.ndarray]:
    """Category mean box size over a corpus, in first-seen category order."""
    groups: Dict[str, list] = {}
    for inst in instances:
        groups.setdefault(inst.category, []).append(inst.pose.size)
    return {cat: np.mean(sizes, axis=0) for cat, sizes in groups.items()}


def generate_corpus(cfg: HarnessConfig) -> Corpus:
    instances, ids = [], []
    for cat in cfg.categories:
        sym = SymmetryTag(cat, cfg.symmetry.get(cat, "none"))
        for i in range(cfg.instances_per_category):
            inst = generate_instance(
                cat,
                instance_seed(cfg.seed, cat, i),
                shape_variation=cfg.shape_variation,
                n_points=cfg.n_points,
                n_model=cfg.n_model,
                observation=cfg.observation,
                sym=sym,
                pose_kwargs={"distance": cfg.pose.distance, "lateral": cfg.pose.lateral,
                             "upright": cfg.pose.upright},
            )
            instances.append(inst)
            ids.append(f"{cat}_{i:04d}")
    return Corpus(instances, ids, mean_sizes(instances), cfg.seed, cfg.to_dict())


def write_corpus(corpus: Corpus, out_dir, fmt: str = "ply") -> Path:
    out = Path(out_dir)
    (out / "instances").mkdir(parents=True, exist_ok=True)
    ext = {"ply": ".ply", "json": ".json"}[fmt]
    entries = []
    for iid, inst in zip(corpus.ids, corpus.instances):
        obs_name = f"instances/{iid}{ext}"
        model_name = f"instances/{iid}_model{ext}"
        write_points(out / obs_name, inst.observed, inst.observed_labels)
        write_points(out / model_name, inst.model, inst.model_labels)
        entries.append({
            "id": iid,
            "category": inst.category,
            "symmetry": inst.sym.symmetry,
            "seed": inst.seed,
            "params": inst.params,
            "pose": inst.pose.to_dict(),
            "hinge": None if inst.hinge is None else list(inst.hinge),
            "observed": obs_name,
            "model": model_name,
        })
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "seed": corpus.seed,
        "config": corpus.config,
        "mean_sizes": {k: v.tolist() for k, v in corpus.mean_sizes.items()},
        "instances": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
    return out


def read_corpus(path) -> Corpus:
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    root = manifest_path.parent
    doc = json.loads(manifest_path.read_text())
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported corpus schema_version {doc.get('schema_version')!r}")
    instances, ids = [], []
    for e in doc["instances"]:
        observed, obs_labels = read_points(root / e["observed"])
        model, model_labels = read_points(root / e["model"])
        instances.append(SyntheticInstance(
            category=e["category"],
            params=e["params"],
            model=model,
            pose=Pose9D.from_dict(e["pose"]),
            observed=observed,
            sym=SymmetryTag(e["category"], e["symmetry"]),
            seed=e["seed"],
            model_labels=model_labels,
            observed_labels=obs_labels,
            hinge=None if e.get("hinge") is None else tuple(e["hinge"]),
        ))
        ids.append(e["id"])
    sizes = {k: np.asarray(v, dtype=float) for k, v in doc["mean_sizes"].items()}
    return Corpus(instances, ids, sizes, doc.get("seed", 0), doc.get("config", {}))
