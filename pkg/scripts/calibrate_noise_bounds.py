"""Monte-Carlo medians of decode errors under Gaussian DVPB vector noise.

Writes tests/fixtures/decode_noise_bounds.json, which the test suite uses as
regression bounds. Rerun only when the decoder or the pipeline changes on
purpose.
"""

import json
from pathlib import Path

import numpy as np

from bboxpose.geometry import Pose9D, random_rotation, rotation_angle
from bboxpose.harness.config import config_from_dict
from bboxpose.harness.pipeline import run_pipeline
from bboxpose.projection import ProjectionField, decode_pose, encode_dvpb

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "decode_noise_bounds.json"

SIGMA = 0.005
TRIALS = 200
POINTS = 256
CALIBRATION_SEED = 1234
PIPELINE_CONFIG = {
    "seed": 99,
    "instances_per_category": 10,
    "categories": ["bottle", "bowl", "camera", "can", "laptop", "mug"],
    "decode": {"field_noise": SIGMA},
}


def random_case(rng):
    size = rng.uniform(0.05, 0.4, 3)
    pose = Pose9D(random_rotation(rng), rng.uniform(-0.5, 0.5, 3) + [0, 0, 1.0], size)
    local = rng.uniform(-0.5, 0.5, (POINTS, 3)) * size
    return pose, pose.transform(local)


def decode_errors(seed, trials=TRIALS, sigma=SIGMA):
    """(rotation rad, translation m, max size m) errors, one row per trial."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(trials):
        pose, pts = random_case(rng)
        f = encode_dvpb(pts, pose)
        noisy = ProjectionField(f.vectors + rng.normal(0.0, sigma, f.vectors.shape), f.mask)
        est = decode_pose(noisy, pts)
        out.append([
            rotation_angle(est.rotation, pose.rotation),
            float(np.linalg.norm(est.translation - pose.translation)),
            float(np.abs(est.size - pose.size).max()),
        ])
    return np.array(out)


def main():
    med = np.median(decode_errors(CALIBRATION_SEED), axis=0)
    summary = run_pipeline(config_from_dict(PIPELINE_CONFIG)).summary
    doc = {
        "sigma": SIGMA,
        "trials": TRIALS,
        "points": POINTS,
        "seed": CALIBRATION_SEED,
        "median_rotation_rad": med[0],
        "median_translation_m": med[1],
        "median_size_m": med[2],
        "pipeline_config": PIPELINE_CONFIG,
        "pipeline_medians": {k: summary[k] for k in
                             ("median_rotation_err_deg", "median_translation_err_cm", "median_size_err_m")},
    }
    FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(json.dumps(doc, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
