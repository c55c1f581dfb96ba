import math

import numpy as np
import pytest

from oracles import central_diff_grad, relative_grad_error
from setembed.errors import ContractError, InvalidArgumentError, ShapeError
from setembed.losses import (
    LossResult,
    LossWeights,
    center_loss,
    combine_losses,
    max_margin_loss,
    pushing_loss,
    softmax_loss,
)
from setembed.model import ClassifierHead, init_head
from setembed.setparams import CentroidSet
from setembed.svm import FitInfo, Hyperplane, HyperplaneSet


def make_plane(w, b, class_id):
    return Hyperplane(np.asarray(w, dtype=np.float64), float(b), class_id,
                      FitInfo(0, 0.0, True))


def random_instance(seed, n=12, d=5, m=4):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    labels = np.concatenate([np.arange(m), rng.integers(0, m, size=n - m)])
    centroids = CentroidSet(
        {j: rng.standard_normal(d) * 2.0 for j in range(m)},
        {j: 1 for j in range(m)}, class_count=m)
    planes = {j: make_plane(rng.standard_normal(d), rng.standard_normal(), j)
              for j in range(m)}
    return X, labels, centroids, HyperplaneSet(planes, d, m), rng


class TestSoftmax:
    def test_uniform_logits_give_log_m(self):
        head = ClassifierHead(np.zeros((2, 3)), np.zeros(3))
        result = softmax_loss(head, np.array([[5.0, -1.0]]), np.array([2]))
        assert result.value == pytest.approx(math.log(3), rel=1e-12)

    def test_confident_correct_logits(self):
        # logits (10, -10) with true class 0: loss = log(1 + e^-20)
        head = ClassifierHead(np.array([[10.0, -10.0]]), np.zeros(2))
        result = softmax_loss(head, np.array([[1.0]]), np.array([0]))
        assert result.value == pytest.approx(2.061153620314381e-09, rel=1e-9)
        assert np.max(np.abs(result.grad_embeddings)) < 1e-7

    def test_single_class_head_rejected(self):
        head = ClassifierHead(np.zeros((2, 1)), np.zeros(1))
        with pytest.raises(InvalidArgumentError):
            softmax_loss(head, np.zeros((1, 2)), np.array([0]))

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradients_match_finite_differences(self, seed):
        X, labels, _, _, rng = random_instance(seed)
        head = init_head(X.shape[1], 4, seed)
        result = softmax_loss(head, X, labels)

        numeric = central_diff_grad(lambda Z: softmax_loss(head, Z, labels).value, X)
        assert relative_grad_error(result.grad_embeddings, numeric) < 1e-6

        def value_at_W(W):
            return softmax_loss(ClassifierHead(W, head.b), X, labels).value
        assert relative_grad_error(result.grad_head[0],
                                   central_diff_grad(value_at_W, head.W)) < 1e-6

        def value_at_b(b):
            return softmax_loss(ClassifierHead(head.W, b), X, labels).value
        assert relative_grad_error(result.grad_head[1],
                                   central_diff_grad(value_at_b, head.b)) < 1e-6


class TestMaxMargin:
    def two_plane_set(self):
        planes = {0: make_plane([1.0, 0.0], 0.0, 0), 1: make_plane([-1.0, 0.0], 0.0, 1)}
        return HyperplaneSet(planes, 2, 2)

    def test_on_both_hyperplanes(self):
        result = max_margin_loss(np.array([[0.0, 0.0]]), np.array([0]),
                                 self.two_plane_set(), 1.0)
        assert result.value == pytest.approx(1.0, abs=1e-15)

    def test_deep_inside_own_class(self):
        result = max_margin_loss(np.array([[2.0, 0.0]]), np.array([0]),
                                 self.two_plane_set(), 1.0)
        assert result.value == pytest.approx(math.exp(-2), rel=1e-12)

    def test_gradient_pulls_to_positive_side(self):
        result = max_margin_loss(np.array([[0.0, 0.0]]), np.array([0]),
                                 self.two_plane_set(), 1.0)
        assert result.grad_embeddings == pytest.approx(np.array([[-1.0, 0.0]]))
        # descending the gradient moves x to its own class's positive side
        moved = np.array([[0.0, 0.0]]) - 0.1 * result.grad_embeddings
        assert moved[0, 0] > 0

    def test_scale_invariance_in_hyperplane(self):
        X, labels, _, planes, _ = random_instance(7)
        base = max_margin_loss(X, labels, planes, 0.5)
        rescaled = {
            j: make_plane(3.7 * p.w, 3.7 * p.b, j)
            for j, p in planes.planes.items()
        }
        scaled = max_margin_loss(
            X, labels, HyperplaneSet(rescaled, planes.embedding_dim,
                                     planes.class_count), 0.5)
        assert scaled.value == pytest.approx(base.value, rel=1e-12)
        assert np.allclose(scaled.grad_embeddings, base.grad_embeddings, rtol=1e-12)

    def test_missing_class_skipped_and_reported(self):
        planes = HyperplaneSet({0: make_plane([1.0, 0.0], 0.0, 0)}, 2, 3,
                               omitted_classes=(2,))
        result = max_margin_loss(np.array([[1.0, 1.0]]), np.array([1]), planes, 1.0)
        assert 2 in result.skipped_classes
        assert np.isfinite(result.value)

    def test_tiny_norm_hyperplane_skipped(self):
        planes = HyperplaneSet({0: make_plane([1e-13, 0.0], 0.0, 0),
                                1: make_plane([0.0, 1.0], 0.0, 1)}, 2, 2)
        result = max_margin_loss(np.array([[0.5, 0.5]]), np.array([0]), planes, 1.0)
        assert result.skipped_classes == (0,)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradient_matches_finite_differences(self, seed):
        X, labels, _, planes, _ = random_instance(seed)
        result = max_margin_loss(X, labels, planes, 0.7)
        numeric = central_diff_grad(
            lambda Z: max_margin_loss(Z, labels, planes, 0.7).value, X)
        assert relative_grad_error(result.grad_embeddings, numeric) < 1e-6


class TestCenter:
    def test_zero_at_centroids(self):
        centroids = CentroidSet({0: np.array([1.0, 2.0])}, {0: 1}, 1)
        result = center_loss(np.array([[1.0, 2.0]]), np.array([0]), centroids, 1.0)
        assert result.value == 0.0
        assert np.all(result.grad_embeddings == 0.0)

    def test_unit_offset(self):
        centroids = CentroidSet({0: np.zeros(2)}, {0: 1}, 1)
        result = center_loss(np.array([[1.0, 1.0]]), np.array([0]), centroids, 1.0)
        assert result.value == pytest.approx(1.0, abs=1e-15)
        assert np.array_equal(result.grad_embeddings, [[1.0, 1.0]])

    def test_missing_centroid_is_contract_error(self):
        centroids = CentroidSet({0: np.zeros(2)}, {0: 1}, 2)
        with pytest.raises(ContractError):
            center_loss(np.zeros((1, 2)), np.array([1]), centroids, 1.0)

    def test_translation_covariance(self):
        X, labels, centroids, _, rng = random_instance(4)
        shift = rng.standard_normal(X.shape[1])
        moved = CentroidSet({j: c + shift for j, c in centroids.centroids.items()},
                            centroids.counts, centroids.class_count)
        a = center_loss(X, labels, centroids, 0.3)
        b = center_loss(X + shift, labels, moved, 0.3)
        assert b.value == pytest.approx(a.value, rel=1e-12)
        assert np.allclose(a.grad_embeddings, b.grad_embeddings, atol=1e-12)

    @pytest.mark.parametrize("seed", [0, 1])
    def test_gradient_matches_finite_differences(self, seed):
        X, labels, centroids, _, _ = random_instance(seed)
        result = center_loss(X, labels, centroids, 0.4)
        numeric = central_diff_grad(
            lambda Z: center_loss(Z, labels, centroids, 0.4).value, X)
        assert relative_grad_error(result.grad_embeddings, numeric) < 1e-6


class TestPushing:
    def test_coincident_negative_centroid(self):
        centroids = CentroidSet({0: np.array([9.0, 9.0]), 1: np.zeros(2)},
                                {0: 1, 1: 1}, 2)
        result = pushing_loss(np.array([[0.0, 0.0]]), np.array([0]), centroids, 1.0)
        assert result.value == pytest.approx(0.5, abs=1e-12)
        assert np.all(result.grad_embeddings == 0.0)

    def test_three_four_five_distance(self):
        centroids = CentroidSet({0: np.array([30.0, 30.0]), 1: np.zeros(2)},
                                {0: 1, 1: 1}, 2)
        result = pushing_loss(np.array([[3.0, 4.0]]), np.array([0]), centroids, 1.0)
        assert result.value == pytest.approx(0.0033689734995427335, rel=1e-10)

    def test_far_centroids_negligible(self):
        centroids = CentroidSet({0: np.zeros(2), 1: np.array([100.0, 0.0])},
                                {0: 1, 1: 1}, 2)
        result = pushing_loss(np.array([[0.0, 0.0]]), np.array([0]), centroids, 1.0)
        assert result.value < 1e-20
        assert np.max(np.abs(result.grad_embeddings)) < 1e-20

    def test_missing_centroid_is_contract_error(self):
        centroids = CentroidSet({0: np.zeros(2)}, {0: 1}, 2)
        with pytest.raises(ContractError):
            pushing_loss(np.zeros((1, 2)), np.array([0]), centroids, 1.0)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gradient_matches_finite_differences(self, seed):
        X, labels, centroids, _, _ = random_instance(seed)
        result = pushing_loss(X, labels, centroids, 0.9)
        numeric = central_diff_grad(
            lambda Z: pushing_loss(Z, labels, centroids, 0.9).value, X)
        assert relative_grad_error(result.grad_embeddings, numeric) < 1e-6


class TestCombineAndProperties:
    def test_single_term_unchanged(self):
        r = LossResult(0.7, np.ones((2, 2)))
        combined = combine_losses([r])
        assert combined.value == 0.7
        assert np.array_equal(combined.grad_embeddings, r.grad_embeddings)

    def test_two_terms_sum(self):
        a = LossResult(0.4, np.full((2, 2), 1.0))
        b = LossResult(0.6, np.full((2, 2), 2.0))
        combined = combine_losses([a, b])
        assert combined.value == pytest.approx(1.0, abs=1e-15)
        assert np.array_equal(combined.grad_embeddings, np.full((2, 2), 3.0))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            combine_losses([LossResult(0.0, np.zeros((2, 2))),
                            LossResult(0.0, np.zeros((3, 2)))])

    def test_joint_gradient_matches_finite_differences(self):
        X, labels, centroids, planes, _ = random_instance(5)
        head = init_head(X.shape[1], 4, 5)

        def total_value(Z):
            return combine_losses([
                softmax_loss(head, Z, labels),
                max_margin_loss(Z, labels, planes, 0.03),
                center_loss(Z, labels, centroids, 0.0001),
                pushing_loss(Z, labels, centroids, 0.03),
            ]).value

        combined = combine_losses([
            softmax_loss(head, X, labels),
            max_margin_loss(X, labels, planes, 0.03),
            center_loss(X, labels, centroids, 0.0001),
            pushing_loss(X, labels, centroids, 0.03),
        ])
        numeric = central_diff_grad(total_value, X)
        assert relative_grad_error(combined.grad_embeddings, numeric) < 1e-6

    def test_all_values_nonnegative(self):
        for seed in range(5):
            X, labels, centroids, planes, _ = random_instance(seed)
            head = init_head(X.shape[1], 4, seed)
            assert softmax_loss(head, X, labels).value >= 0.0
            assert max_margin_loss(X, labels, planes, 0.1).value >= 0.0
            assert center_loss(X, labels, centroids, 0.1).value >= 0.0
            assert pushing_loss(X, labels, centroids, 0.1).value >= 0.0

    def test_lambda_scales_exactly_linearly(self):
        X, labels, centroids, planes, _ = random_instance(6)
        for fn, extra in ((max_margin_loss, planes), (center_loss, centroids),
                          (pushing_loss, centroids)):
            one = fn(X, labels, extra, 1.0)
            scaled = fn(X, labels, extra, 4.0)
            assert scaled.value == pytest.approx(4.0 * one.value, rel=1e-15)
            assert np.allclose(scaled.grad_embeddings, 4.0 * one.grad_embeddings,
                               rtol=1e-15, atol=0)

    def test_weights_reject_negative(self):
        with pytest.raises(InvalidArgumentError):
            LossWeights(lambda_M=-0.1)
