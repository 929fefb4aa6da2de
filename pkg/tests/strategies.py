"""Shared hypothesis strategies."""

import numpy as np
from hypothesis import strategies as st

from bboxpose.geometry import Pose9D, random_rotation

seeds = st.integers(0, 2**32 - 1)


@st.composite
def poses(draw, min_size=0.05, max_size=1.0):
    rng = np.random.default_rng(draw(seeds))
    size = rng.uniform(min_size, max_size, 3)
    return Pose9D(random_rotation(rng), rng.uniform(-2.0, 2.0, 3), size)


@st.composite
def rotations(draw):
    return random_rotation(np.random.default_rng(draw(seeds)))


def interior_points(rng, pose, n):
    """Uniform points strictly inside the box of ``pose``."""
    return pose.transform(rng.uniform(-0.5, 0.5, (n, 3)) * pose.size)
