"""Regenerate the bundled mean-shape prior fixtures (src/bboxpose/data/priors)."""

import json
from pathlib import Path

from bboxpose.harness.shapes import CATEGORIES
from bboxpose.harness.synth import PRIOR_POINTS, PRIOR_SEED, build_prior

OUT = Path(__file__).resolve().parents[1] / "src" / "bboxpose" / "data" / "priors"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for cat in CATEGORIES:
        pts = build_prior(cat)
        doc = {"schema_version": 1, "category": cat, "seed": PRIOR_SEED,
               "n_points": PRIOR_POINTS, "points": pts.tolist(), "labels": None}
        (OUT / f"{cat}.json").write_text(json.dumps(doc))
        print(f"{cat}: {len(pts)} points")


if __name__ == "__main__":
    main()
