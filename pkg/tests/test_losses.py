import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from bboxpose.errors import KinkProximity, MaskMismatch, NonFinite, NonPositiveSigma
from bboxpose.geometry import Pose9D, axis_angle, camera_to_nocs
from bboxpose.harness.synth import generate_instance, load_prior
from bboxpose.losses import (
    LossWeights,
    consistency_loss,
    consistency_loss_grad,
    numeric_gradient_check,
    recover_field,
    sprv_loss,
    sprv_loss_grad,
    total_loss,
)
from bboxpose.projection import (
    ProjectionField,
    SprvField,
    compute_sprv,
    encode_dvpb,
    encode_dvpb_nocs,
    hypothesize_dvpb,
)
from bboxpose.shape_prior import canonical_bbox

from strategies import seeds

# sqrt(2) * 0.1 / 0.5 + ln(0.5)
HAND_VALUE = -0.4103044680853262


def _single(vec, face=0):
    r = np.zeros((1, 6, 3))
    r[0, face] = vec
    mask = np.zeros(6, bool)
    mask[face] = True
    return SprvField(r, mask)


def _away_from_kinks(rng, shape, lo=0.01):
    x = rng.uniform(lo, 1.0, shape)
    return x * rng.choice([-1.0, 1.0], shape)


class TestSprvLoss:
    def test_zero(self):
        z = np.zeros((5, 6, 3))
        assert sprv_loss(z, z, 1.0, 1.0, 0.01) == 0.0

    def test_hand_value(self):
        pred, gt = _single([0.1, 0, 0]), _single([0, 0, 0])
        got = sprv_loss(pred, gt, 0.5, 1.0, lambda0=0.0, reduction="sum")
        assert abs(got - HAND_VALUE) < 1e-9
        assert abs(got - (math.sqrt(2) * 0.1 / 0.5 + math.log(0.5))) < 1e-12

    def test_l1_norm_per_entry(self):
        pred, gt = _single([0.03, -0.05, 0.02]), _single([0, 0, 0])
        got = sprv_loss(pred, gt, 0.5, 1.0, lambda0=0.0, reduction="sum")
        assert abs(got - HAND_VALUE) < 1e-9

    def test_regularizer(self):
        pred, gt = _single([0.2, 0, 0]), _single([0.2, 0, 0])
        got = sprv_loss(pred, gt, 1.0, 0.5, lambda0=0.01, reduction="sum")
        assert abs(got - 0.01 * (math.sqrt(2) * 0.2 / 0.5 + math.log(0.5))) < 1e-12

    def test_mean_is_sum_over_count(self, rng):
        a, b = rng.normal(size=(2, 7, 6, 3))
        s = sprv_loss(a, b, 0.7, 1.3, 0.01, "sum")
        assert sprv_loss(a, b, 0.7, 1.3, 0.01, "mean") == pytest.approx(s / 42, rel=1e-12)

    def test_per_face_sigma(self, rng):
        a, b = rng.normal(size=(2, 4, 6, 3))
        sig = rng.uniform(0.2, 2, 6)
        expect = sum(math.sqrt(2) / sig[j] * np.abs(a[i, j] - b[i, j]).sum() + math.log(sig[j])
                     for i in range(4) for j in range(6))
        assert sprv_loss(a, b, sig, 1.0, 0.0, "sum") == pytest.approx(expect, rel=1e-12)

    @pytest.mark.parametrize("a", [0.01, 0.1, 0.37, 2.0])
    def test_optimal_sigma(self, a):
        pred, gt = _single([a, 0, 0]), _single([0, 0, 0])
        res = minimize_scalar(lambda s: sprv_loss(pred, gt, s, 1.0, 0.0, "sum"),
                              bounds=(1e-4, 10.0), method="bounded", options={"xatol": 1e-10})
        assert res.x == pytest.approx(math.sqrt(2) * a, rel=1e-6)

    @given(st.floats(0.01, 1.0), st.floats(0.05, 0.95))
    def test_unimodal_in_sigma(self, a, frac):
        pred, gt = _single([a, 0, 0]), _single([0, 0, 0])
        star = math.sqrt(2) * a

        def f(s):
            return sprv_loss(pred, gt, s, 1.0, 0.0, "sum")

        lo, hi = star * frac, star / frac
        assert f(lo * 0.9) >= f(lo) >= f(star)
        assert f(hi * 1.1) >= f(hi) >= f(star)

    def test_bad_sigma(self):
        z = np.zeros((1, 6, 3))
        with pytest.raises(NonPositiveSigma):
            sprv_loss(z, z, 0.0)
        with pytest.raises(NonPositiveSigma):
            sprv_loss(z, z, 1.0, -1.0)

    def test_mask_mismatch(self):
        with pytest.raises(MaskMismatch):
            sprv_loss(_single([0, 0, 0], 0), _single([0, 0, 0], 1))

    def test_masked_faces_ignored(self, rng):
        pred = SprvField(rng.normal(size=(3, 6, 3)), np.array([0, 0, 1, 1, 0, 0], bool))
        gt = SprvField(pred.residuals.copy(), pred.mask)
        gt.residuals[:, 0] += 5.0
        assert sprv_loss(pred, gt, 1.0, 1.0, 0.0) == 0.0


class TestConsistencyLoss:
    def test_identical(self, rng):
        v = rng.normal(size=(4, 6, 3))
        assert consistency_loss(v, v.copy()) == 0.0

    def test_l1_arithmetic(self):
        a = np.zeros((1, 6, 3))
        b = a.copy()
        b[0, 2] = [0.1, -0.2, 0.0]
        assert consistency_loss(a, b, "sum") == pytest.approx(0.3, abs=1e-15)

    def test_mask_mismatch(self):
        a = ProjectionField(np.zeros((1, 6, 3)), np.ones(6, bool))
        b = ProjectionField(np.zeros((1, 6, 3)), np.array([0, 0, 1, 1, 0, 0], bool))
        with pytest.raises(MaskMismatch):
            consistency_loss(a, b)

    @given(seeds)
    def test_nonnegative_zero_iff_equal(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(3, 6, 3))
        b = a.copy()
        assert consistency_loss(a, b) == 0.0
        b[rng.integers(3), rng.integers(6), rng.integers(3)] += rng.choice([-1, 1]) * rng.uniform(1e-6, 1)
        assert consistency_loss(a, b) > 0.0

    @pytest.mark.parametrize("category", ["camera", "mug", "laptop", "can"])
    def test_exact_pipeline_closes(self, category):
        for seed in range(5):
            inst = generate_instance(category, seed, n_points=256)
            pose, pts = inst.pose, inst.observed
            gt = encode_dvpb(pts, pose, inst.sym)
            prior = load_prior(category)
            sM, cM = canonical_bbox(prior)
            coords = camera_to_nocs(pts, pose).coordinate
            hyp = hypothesize_dvpb(encode_dvpb_nocs(coords, sM, inst.sym, cM), 0.2, pose.rotation, inst.sym)
            recovered = recover_field(hyp, compute_sprv(gt, hyp))
            assert consistency_loss(encode_dvpb(pts, pose, inst.sym), recovered) < 1e-9


class TestTotalLoss:
    def test_zero(self):
        assert total_loss(0, 0, 0, 0) == 0.0

    def test_default_weights(self):
        assert total_loss(1, 1, 1, 1) == 22.0
        w = LossWeights()
        assert (w.lambda0, w.lambda1, w.lambda2, w.lambda3, w.lambda4) == (0.01, 8.0, 10.0, 3.0, 1.0)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4), st.floats(0, 100))
    def test_scales_with_weights(self, comps, k):
        w = LossWeights()
        assert total_loss(*comps, w.scaled(k)) == pytest.approx(k * total_loss(*comps, w), rel=1e-9, abs=1e-9)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4), st.integers(0, 3), st.floats(-10, 10))
    def test_linear_in_components(self, comps, i, delta):
        bumped = list(comps)
        bumped[i] += delta
        w = LossWeights()
        weight = (w.lambda1, w.lambda2, w.lambda3, w.lambda4)[i]
        assert total_loss(*bumped) - total_loss(*comps) == pytest.approx(weight * delta, abs=1e-8)

    def test_non_finite(self):
        with pytest.raises(NonFinite):
            total_loss(1, float("nan"), 0, 0)
        with pytest.raises(NonFinite):
            total_loss(float("inf"), 0, 0, 0)

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            LossWeights(lambda3=-1.0)


class TestGradients:
    @pytest.mark.parametrize("reduction", ["sum", "mean"])
    def test_sprv_loss(self, rng, reduction):
        gt = rng.normal(size=(5, 6, 3))
        pred = gt + _away_from_kinks(rng, gt.shape)
        # keep pred itself off the regularizer's kink too
        pred = np.where(np.abs(pred) < 0.01, pred + 0.05, pred)

        def loss(pred, gt, sigma_data, sigma_reg):
            return sprv_loss(pred, gt, sigma_data, sigma_reg, 0.01, reduction)

        def grad(pred, gt, sigma_data, sigma_reg):
            return sprv_loss_grad(pred, gt, sigma_data, sigma_reg, 0.01, reduction)

        inputs = {"pred": pred, "gt": gt, "sigma_data": rng.uniform(0.3, 2, 6),
                  "sigma_reg": rng.uniform(0.3, 2, 6)}
        err = numeric_gradient_check(loss, grad, inputs, eps=1e-6, kinks=[pred - gt, pred])
        assert err < 1e-5

    @pytest.mark.parametrize("reduction", ["sum", "mean"])
    def test_consistency_loss(self, rng, reduction):
        a = rng.normal(size=(5, 6, 3))
        b = a + _away_from_kinks(rng, a.shape)
        err = numeric_gradient_check(
            lambda from_pose, from_sprv: consistency_loss(from_pose, from_sprv, reduction),
            lambda from_pose, from_sprv: consistency_loss_grad(from_pose, from_sprv, reduction),
            {"from_pose": a, "from_sprv": b}, eps=1e-6, kinks=[a - b])
        assert err < 1e-5

    @pytest.mark.parametrize("a", [0.05, 0.3, 1.7])
    def test_sigma_stationary_at_optimum(self, a):
        pred, gt = _single([a, 0, 0]), _single([0, 0, 0])
        sig = np.full(6, math.sqrt(2) * a)
        g = sprv_loss_grad(pred, gt, sig, 1.0, 0.0, "sum")["sigma_data"]
        assert np.abs(g).max() < 1e-6

    def test_kink_proximity(self):
        a = np.zeros((1, 6, 3))
        b = a.copy()
        b[0, 0, 0] = 5e-6
        with pytest.raises(KinkProximity):
            numeric_gradient_check(consistency_loss, consistency_loss_grad,
                                   {"from_pose": a, "from_sprv": b}, eps=1e-6, kinks=[a - b])


def test_consistency_grows_with_pose_error():
    inst = generate_instance("camera", 11, n_points=256)
    pose, pts = inst.pose, inst.observed
    target = encode_dvpb(pts, pose)
    axis = np.array([0.3, -0.5, 0.8])
    values = []
    for k in range(1, 11):
        R = axis_angle(axis, np.radians(k)) @ pose.rotation
        bent = Pose9D(R, pose.translation + k * 1e-3, pose.size)
        values.append(consistency_loss(encode_dvpb(pts, bent), target))
    assert values[0] > 0
    assert all(b > a for a, b in zip(values, values[1:]))
