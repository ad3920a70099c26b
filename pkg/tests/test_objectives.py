import time

import numpy as np
import pytest

from boundarynorm.model import ForwardBatch, ModelParams, forward
from boundarynorm.objectives import (
    BOUNDARY_FLOOR,
    DuplicateClassWeightsError,
    LossKind,
    adaptive_scaled_loss,
    boundary_distance,
    cross_entropy,
    elogitnorm_gap_form,
    elogitnorm_loss,
    evaluate_loss,
    logitnorm_loss,
    pairwise_weight_norms,
)

from helpers import finite_difference_grads, flatten_grads, random_model


def affine_model(w, b):
    return ModelParams(hidden=(), final_weight=np.asarray(w, float), final_bias=np.asarray(b, float))


class TestCrossEntropy:
    def test_uniform_logits(self):
        model = affine_model(np.zeros((2, 2)), np.zeros(2))
        res = cross_entropy(model, np.zeros((1, 2)), np.array([0]))
        assert abs(res.value - np.log(2)) < 1e-12

    def test_confident_correct(self):
        model = affine_model(np.eye(2), np.zeros(2))
        res = cross_entropy(model, np.array([[1000.0, 0.0]]), np.array([0]))
        assert res.value < 1e-12

    def test_label_out_of_range(self):
        model = affine_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError, match="labels"):
            cross_entropy(model, np.zeros((1, 2)), np.array([2]))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        for _ in range(3):
            model = random_model(rng, [3, 6, 4, 4])
            x = rng.normal(size=(5, 3))
            y = rng.integers(0, 4, size=5)
            res = cross_entropy(model, x, y)
            fd = finite_difference_grads(lambda m: cross_entropy(m, x, y).value, model)
            g = flatten_grads(res.grads)
            assert np.all(np.abs(g - fd) <= 1e-5 * np.abs(fd) + 1e-7)


class TestLogitNorm:
    def test_uniform_logits_give_log_c(self):
        # symmetric logits force a uniform scaled softmax for any tau
        c = 10
        model = affine_model(np.zeros((c, c)), np.full(c, 3.0))
        res = logitnorm_loss(model, np.zeros((2, c)), np.array([0, 4]), tau=0.7)
        assert abs(res.value - np.log(c)) < 1e-12

    def test_hand_example(self):
        # f = (3, 4), tau = 1: ||f|| = 5, scaled (0.6, 0.8), y = 1
        model = affine_model(np.eye(2), np.zeros(2))
        res = logitnorm_loss(model, np.array([[3.0, 4.0]]), np.array([1]), tau=1.0)
        assert abs(res.value - np.log(1 + np.exp(-0.2))) < 1e-12
        assert abs(res.value - 0.598139) < 1e-6

    def test_zero_norm_rejected(self):
        model = affine_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError, match="zero-norm"):
            logitnorm_loss(model, np.zeros((1, 2)), np.array([0]), tau=1.0)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(22)
        for _ in range(3):
            model = random_model(rng, [3, 5, 4, 3])
            x = rng.normal(size=(4, 3))
            y = rng.integers(0, 3, size=4)
            res = logitnorm_loss(model, x, y, tau=0.04)
            fd = finite_difference_grads(
                lambda m: logitnorm_loss(m, x, y, tau=0.04).value, model
            )
            g = flatten_grads(res.grads)
            assert np.all(np.abs(g - fd) <= 1e-5 * np.abs(fd) + 1e-7)


class TestBoundaryDistance:
    def test_two_class_point_to_line(self):
        w = np.array([[1.0, -1.0], [0.0, 0.0]])  # columns (1,0), (-1,0)
        batch = ForwardBatch(features=np.array([[2.0, 0.0]]), logits=np.array([[2.0, -2.0]]))
        bd = boundary_distance(batch, w, np.zeros(2))
        assert abs(bd.per_sample[0] - 2.0) < 1e-12
        assert bd.argmax_index[0] == 0

    def test_three_symmetric_classes(self):
        # unit weights at 0, 120, 240 degrees; z = (1, 0)
        angles = np.array([0.0, 2 * np.pi / 3, 4 * np.pi / 3])
        w = np.vstack([np.cos(angles), np.sin(angles)])
        z = np.array([[1.0, 0.0]])
        logits = z @ w
        bd = boundary_distance(ForwardBatch(features=z, logits=logits), w, np.zeros(3))
        assert abs(bd.per_sample[0] - 1.5 / np.sqrt(3.0)) < 1e-12
        assert abs(bd.per_sample[0] - 0.866025) < 1e-6

    def test_boundary_point_floored(self):
        w = np.array([[1.0, -1.0], [0.0, 0.0]])
        batch = ForwardBatch(features=np.array([[0.0, 5.0]]), logits=np.array([[0.0, 0.0]]))
        bd = boundary_distance(batch, w, np.zeros(2))
        assert bd.per_sample[0] == BOUNDARY_FLOOR

    def test_duplicate_columns_identified(self):
        w = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        batch = ForwardBatch(features=np.array([[3.0, 0.0]]), logits=np.array([[3.0, 3.0, 0.0]]))
        with pytest.raises(DuplicateClassWeightsError) as err:
            boundary_distance(batch, w, np.zeros(3))
        assert err.value.class_pair == (0, 1)

    def test_argmax_ties_break_to_smallest_index(self):
        w = np.array([[1.0, -1.0, 0.5], [0.0, 0.0, 0.5]])
        logits = np.array([[4.0, 4.0, 0.0]])
        bd = boundary_distance(ForwardBatch(features=np.zeros((1, 2)), logits=logits), w, np.zeros(3))
        assert bd.argmax_index[0] == 0

    def test_argmax_invariant_under_positive_scaling(self):
        rng = np.random.default_rng(30)
        w = rng.normal(size=(4, 5))
        logits = rng.normal(size=(8, 5))
        z = rng.normal(size=(8, 4))
        a = boundary_distance(ForwardBatch(features=z, logits=logits), w, np.zeros(5))
        b = boundary_distance(ForwardBatch(features=z, logits=3.7 * logits), w, np.zeros(5))
        assert np.array_equal(a.argmax_index, b.argmax_index)


class TestELogitNorm:
    def test_two_class_hand_example(self):
        w = np.array([[1.0, -1.0], [0.0, 0.0]])
        model = affine_model(w, np.zeros(2))
        res = elogitnorm_loss(model, np.array([[2.0, 0.0]]), np.array([0]))
        # D = 2, scaled logits (1, -1), loss = ln(1 + e^-2)
        assert abs(res.value - np.log(1 + np.exp(-2.0))) < 1e-12
        assert abs(res.value - 0.126928) < 1e-6

    def test_uniform_logits_floor_to_log_c(self):
        c = 5
        w = np.zeros((3, c))
        w[0] = [1.0, 2.0, 3.0, 4.0, 5.0]  # distinct columns, same logits at z = 0
        model = affine_model(w, np.zeros(c))
        res = elogitnorm_loss(model, np.zeros((1, 3)), np.array([2]))
        assert abs(res.value - np.log(c)) < 1e-12

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(23)
        for _ in range(3):
            model = random_model(rng, [3, 6, 4, 4])
            x = rng.normal(size=(5, 3))
            y = rng.integers(0, 4, size=5)
            res = elogitnorm_loss(model, x, y)
            fd = finite_difference_grads(lambda m: elogitnorm_loss(m, x, y).value, model)
            g = flatten_grads(res.grads)
            assert np.all(np.abs(g - fd) <= 1e-5 * np.abs(fd) + 1e-7)

    def test_scale_invariance_of_value(self):
        # with b = 0 both f and D(z) scale linearly in z, so the loss is
        # invariant to positive feature rescaling
        rng = np.random.default_rng(24)
        w = rng.normal(size=(4, 5))
        model = affine_model(w, np.zeros(5))
        z = rng.normal(size=(6, 4))
        y = rng.integers(0, 5, size=6)
        a = elogitnorm_loss(model, z, y).value
        b = elogitnorm_loss(model, 3.0 * z, y).value
        assert abs(a - b) < 1e-10

    def test_detach_scale_matches_adaptive(self):
        rng = np.random.default_rng(25)
        model = random_model(rng, [3, 5, 4, 3])
        x = rng.normal(size=(4, 3))
        y = rng.integers(0, 3, size=4)
        batch = forward(model, x)
        bd = boundary_distance(batch, model.final_weight, model.final_bias)
        detached = elogitnorm_loss(model, x, y, detach_scale=True)
        adaptive = adaptive_scaled_loss(model, x, y, bd.per_sample)
        assert abs(detached.value - adaptive.value) < 1e-12
        assert np.max(np.abs(flatten_grads(detached.grads) - flatten_grads(adaptive.grads))) < 1e-12


class TestAdaptiveScaling:
    def test_unit_scale_reduces_to_cross_entropy(self):
        rng = np.random.default_rng(26)
        model = random_model(rng, [3, 5, 3])
        x = rng.normal(size=(6, 3))
        y = rng.integers(0, 3, size=6)
        a = adaptive_scaled_loss(model, x, y, np.ones(6))
        b = cross_entropy(model, x, y)
        assert a.value == b.value
        assert np.array_equal(flatten_grads(a.grads), flatten_grads(b.grads))

    def test_logitnorm_scale_value_identity(self):
        rng = np.random.default_rng(27)
        model = random_model(rng, [3, 6, 4, 3])
        x = rng.normal(size=(5, 3))
        y = rng.integers(0, 3, size=5)
        tau = 0.04
        norms = np.linalg.norm(forward(model, x).logits, axis=1)
        a = adaptive_scaled_loss(model, x, y, tau * norms).value
        b = logitnorm_loss(model, x, y, tau=tau).value
        assert abs(a - b) < 1e-12

    def test_boundary_scale_value_identity(self):
        rng = np.random.default_rng(28)
        model = random_model(rng, [3, 6, 4, 3])
        x = rng.normal(size=(5, 3))
        y = rng.integers(0, 3, size=5)
        batch = forward(model, x)
        bd = boundary_distance(batch, model.final_weight, model.final_bias)
        a = adaptive_scaled_loss(model, x, y, bd.per_sample).value
        b = elogitnorm_loss(model, x, y).value
        assert abs(a - b) < 1e-12

    def test_nonpositive_scale_rejected(self):
        model = affine_model(np.eye(2), np.zeros(2))
        with pytest.raises(ValueError, match="positive"):
            adaptive_scaled_loss(model, np.ones((1, 2)), np.array([0]), np.array([0.0]))


class TestGapForm:
    def test_agrees_with_primary_path(self):
        rng = np.random.default_rng(29)
        for _ in range(100):
            model = random_model(rng, [3, 5, 4, 4])
            x = rng.normal(size=(6, 3))
            y = rng.integers(0, 4, size=6)
            a = elogitnorm_loss(model, x, y).value
            b = elogitnorm_gap_form(model, x, y).value
            assert abs(a - b) < 1e-10

    def test_two_class_hand_example(self):
        w = np.array([[1.0, -1.0], [0.0, 0.0]])
        model = affine_model(w, np.zeros(2))
        res = elogitnorm_gap_form(model, np.array([[2.0, 0.0]]), np.array([0]))
        assert abs(res.value - 0.126928) < 1e-6

    def test_gradients_agree_too(self):
        rng = np.random.default_rng(31)
        model = random_model(rng, [3, 5, 4, 4])
        x = rng.normal(size=(6, 3))
        y = rng.integers(0, 4, size=6)
        ga = flatten_grads(elogitnorm_loss(model, x, y).grads)
        gb = flatten_grads(elogitnorm_gap_form(model, x, y).grads)
        assert np.max(np.abs(ga - gb)) < 1e-10

    def test_pairwise_step_scales_quadratically_in_classes(self):
        # O(c^2 m): doubling c should roughly quadruple the pairwise step.
        m = 64

        def timed(c, reps=5):
            rng = np.random.default_rng(c)
            w = rng.normal(size=(m, c))
            pairwise_weight_norms(w)  # warm up
            samples = []
            for _ in range(reps):
                t0 = time.perf_counter()
                pairwise_weight_norms(w)
                samples.append(time.perf_counter() - t0)
            return np.median(samples)

        small = timed(256)
        big = timed(512)
        assert big / small > 2.0  # quadratic in c, wide band for shared CPUs


class TestInvariants:
    def test_losses_nonnegative(self):
        rng = np.random.default_rng(32)
        for _ in range(10):
            model = random_model(rng, [3, 5, 4, 4])
            x = rng.normal(size=(6, 3))
            y = rng.integers(0, 4, size=6)
            assert cross_entropy(model, x, y).value >= 0
            assert logitnorm_loss(model, x, y).value >= 0
            assert elogitnorm_loss(model, x, y).value >= 0

    def test_evaluate_loss_dispatch(self):
        rng = np.random.default_rng(33)
        model = random_model(rng, [3, 4, 3])
        x = rng.normal(size=(4, 3))
        y = rng.integers(0, 3, size=4)
        assert evaluate_loss(model, x, y, LossKind("cross_entropy")).value == cross_entropy(model, x, y).value
        assert evaluate_loss(model, x, y, LossKind("logitnorm", tau=0.1)).value == logitnorm_loss(model, x, y, tau=0.1).value
        assert evaluate_loss(model, x, y, LossKind("elogitnorm")).value == elogitnorm_loss(model, x, y).value

    def test_unknown_loss_kind(self):
        with pytest.raises(ValueError, match="unknown loss"):
            LossKind("hinge")
