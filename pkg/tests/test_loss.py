import math

import numpy as np
import pytest

from shipdet.encoding import RegressionTarget
from shipdet.loss import (
    LossBreakdown,
    LossSample,
    LossWeights,
    PROW_SMOOTH_L1,
    cls_loss,
    multitask_loss,
    reg_loss,
    smooth_l1,
    smooth_l1_grad,
)


class TestSmoothL1:
    def test_values(self):
        assert smooth_l1(0.5) == 0.125
        assert smooth_l1(1.0) == 0.5
        assert smooth_l1(-1.0) == 0.5
        assert smooth_l1(-2.0) == 1.5

    def test_grad(self):
        assert smooth_l1_grad(-2.0) == -1.0
        assert smooth_l1_grad(0.3) == 0.3
        assert smooth_l1_grad(5.0) == 1.0

    def test_knot_continuity(self):
        eps = 1e-9
        assert abs(smooth_l1(1 - eps) - smooth_l1(1 + eps)) < 1e-8
        assert smooth_l1(1.0) == 0.5

    def test_grad_matches_central_differences(self, rng):
        h = 1e-6
        for _ in range(300):
            x = rng.uniform(-3, 3)
            if 0.999 <= abs(x) <= 1.001:
                continue
            fd = (smooth_l1(x + h) - smooth_l1(x - h)) / (2 * h)
            g = smooth_l1_grad(x)
            assert abs(fd - g) <= 1e-5 * max(1.0, abs(g))


class TestClsLoss:
    def test_perfect(self):
        assert cls_loss([0.0, 1.0], 1) == 0.0

    def test_half(self):
        assert math.isclose(cls_loss([0.5, 0.5], 0), math.log(2), rel_tol=1e-12)

    def test_uniform_sixteen(self):
        assert math.isclose(cls_loss([1 / 16] * 16, 7), math.log(16), rel_tol=1e-12)

    def test_zero_prob_clamped_with_warning(self):
        with pytest.warns(UserWarning):
            v = cls_loss([1.0, 0.0], 1)
        assert math.isclose(v, -math.log(1e-12), rel_tol=1e-12)


class TestRegLoss:
    def test_equal_targets(self):
        t = RegressionTarget(0.1, -0.2, 0.3, 0.4, 0.5)
        assert reg_loss(t, t) == 0.0

    def test_half_diffs(self):
        a = RegressionTarget(0.5, 0.5, 0.5, 0.5, 0.5)
        b = RegressionTarget(0.0, 0.0, 0.0, 0.0, 0.0)
        assert math.isclose(reg_loss(a, b), 0.625, rel_tol=1e-12)

    def test_four_field_variant(self):
        a = RegressionTarget(0.5, 0.5, 0.5, 0.5)
        b = RegressionTarget(0.0, 0.0, 0.0, 0.0)
        assert math.isclose(reg_loss(a, b), 0.5, rel_tol=1e-12)

    def test_mixed_arity_raises(self):
        with pytest.raises(ValueError):
            reg_loss(RegressionTarget(0, 0, 0, 0, 0.0), RegressionTarget(0, 0, 0, 0))

    def test_gradient_against_central_differences(self, rng):
        # d/dx_i sum smooth_l1(t*_i - t_i + x) checked coordinatewise
        h = 1e-6
        for _ in range(50):
            vals = rng.uniform(-2, 2, size=10)
            a = RegressionTarget(*vals[:5])
            for i in range(5):
                bumped_hi = list(vals[:5]); bumped_hi[i] += h
                bumped_lo = list(vals[:5]); bumped_lo[i] -= h
                b = RegressionTarget(*vals[5:])
                fd = (reg_loss(RegressionTarget(*bumped_hi), b) - reg_loss(RegressionTarget(*bumped_lo), b)) / (2 * h)
                x = vals[i] - vals[5 + i]
                if 0.999 <= abs(x) <= 1.001:
                    continue
                g = smooth_l1_grad(x)
                assert abs(fd - g) <= 1e-5 * max(1.0, abs(g))


def perfect_sample(positive=True):
    t = RegressionTarget(0.0, 0.0, 0.0, 0.0, 0.0)
    th = RegressionTarget(0.0, 0.0, 0.0, 0.0)
    return LossSample(
        class_probs=np.array([0.0, 1.0]),
        class_label=1,
        positive=positive,
        h_target=th,
        h_pred=th,
        r_target=t,
        r_pred=t,
        prow_probs=np.array([1.0, 0.0, 0.0, 0.0]),
        prow_label=0,
    )


class TestMultitaskLoss:
    def test_perfect_predictions_zero(self):
        out = multitask_loss([perfect_sample() for _ in range(4)])
        assert out.total == 0.0
        assert (out.cls, out.horizontal, out.rotational, out.prow) == (0, 0, 0, 0)

    def test_only_cls_term_survives(self):
        s = perfect_sample()
        s.class_probs = np.array([0.5, 0.5])
        out = multitask_loss([s])
        assert math.isclose(out.total, math.log(2), rel_tol=1e-12)
        assert out.horizontal == out.rotational == out.prow == 0.0

    def test_lambda_linearity_exact(self):
        s = perfect_sample()
        s.prow_probs = np.array([0.25, 0.25, 0.25, 0.25])
        base = multitask_loss([s], LossWeights(lambda3=10.0))
        doubled = multitask_loss([s], LossWeights(lambda3=20.0))
        assert doubled.prow == base.prow
        assert doubled.total - doubled.cls == 2 * (base.total - base.cls)
        assert doubled.cls == base.cls

    def test_duplication_invariance(self):
        s1 = perfect_sample()
        s1.class_probs = np.array([0.3, 0.7])
        s1.r_pred = RegressionTarget(0.2, 0.0, 0.1, 0.0, 0.0)
        s2 = perfect_sample(positive=False)
        base = multitask_loss([s1, s2])
        doubled = multitask_loss([s1, s2, s1, s2])
        for field in ("total", "cls", "horizontal", "rotational", "prow"):
            assert abs(getattr(base, field) - getattr(doubled, field)) <= 1e-12

    def test_negative_samples_skip_regression(self):
        s = perfect_sample(positive=False)
        s.r_pred = RegressionTarget(5.0, 5.0, 5.0, 5.0, 1.0)
        out = multitask_loss([s])
        assert out.total == 0.0

    def test_empty_flagged(self):
        with pytest.warns(UserWarning):
            out = multitask_loss([])
        assert out == LossBreakdown(0.0, 0.0, 0.0, 0.0, 0.0, empty=True)

    def test_total_nonnegative(self, rng):
        for _ in range(100):
            p = rng.dirichlet(np.ones(3))
            prow = rng.dirichlet(np.ones(4))
            s = LossSample(
                class_probs=p,
                class_label=int(rng.integers(0, 3)),
                positive=bool(rng.integers(0, 2)),
                r_target=RegressionTarget(*rng.uniform(-2, 2, 5)),
                r_pred=RegressionTarget(*rng.uniform(-2, 2, 5)),
                prow_probs=prow,
                prow_label=int(rng.integers(0, 4)),
            )
            out = multitask_loss([s])
            assert out.total >= 0.0

    def test_smooth_l1_on_index_mode(self):
        s = perfect_sample()
        s.prow_probs = np.array([0.0, 0.0, 0.9, 0.1])
        s.prow_label = 0
        out = multitask_loss([s], prow_mode=PROW_SMOOTH_L1)
        # |label - argmax| = 2 -> smooth_l1 = 1.5, weighted by lambda3 = 10
        assert math.isclose(out.prow, 1.5, rel_tol=1e-12)
        assert math.isclose(out.total, 15.0, rel_tol=1e-12)

    def test_explicit_counts_override(self):
        s = perfect_sample()
        s.class_probs = np.array([0.5, 0.5])
        out = multitask_loss([s], n_cls=4)
        assert math.isclose(out.cls, math.log(2) / 4, rel_tol=1e-12)

    def test_probs_must_normalize(self):
        with pytest.raises(ValueError):
            LossSample(class_probs=np.array([0.5, 0.4]), class_label=0)
