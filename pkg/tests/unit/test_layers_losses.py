"""Unit tests for dense layers and the MSE / triplet losses.

Analytic gradients are compared against central finite differences in
float64; the hinge cases of the triplet loss are checked on hand-built
vectors.
"""

import numpy as np
import pytest

from patientcode.errors import ShapeError
from patientcode.nn.gradcheck import grad_check
from patientcode.nn.layers import Activation, DenseLayer, dense_backward, dense_forward
from patientcode.nn.losses import batch_triplet_loss, mse_loss, triplet_loss

TOLERANCE = 1e-4


def _layer(activation, in_dim=4, out_dim=3, seed=0):
    """Helper to build a float64 layer."""
    return DenseLayer.initialized(in_dim, out_dim, activation, np.random.default_rng(seed), np.float64)


def _weight_fn(layer, x, upstream):
    """Scalar <upstream, layer(x)> as a function of the flattened weight."""
    def fn(w_flat):
        trial = DenseLayer(w_flat.reshape(layer.weight.shape), layer.bias, layer.activation)
        value = float(np.sum(upstream * dense_forward(trial, x)))
        grad_w, _, _ = dense_backward(trial, x, upstream)
        return value, grad_w
    return fn


def _input_fn(layer, upstream):
    """Scalar <upstream, layer(x)> as a function of the input."""
    def fn(x):
        value = float(np.sum(upstream * dense_forward(layer, x)))
        _, _, grad_x = dense_backward(layer, x, upstream)
        return value, grad_x
    return fn


def test_forward_matches_formula():
    """Test a linear layer computes W x + b."""
    layer = DenseLayer(np.array([[1.0, 2.0], [0.0, -1.0]]), np.array([0.5, 0.0]))
    np.testing.assert_allclose(dense_forward(layer, np.array([1.0, 1.0])), [3.5, -1.0])


def test_relu_and_tanh_activations():
    """Test ReLU zeroes negatives and tanh squashes into (-1, 1)."""
    weight = np.eye(2)
    bias = np.zeros(2)
    x = np.array([-2.0, 3.0])
    np.testing.assert_allclose(dense_forward(DenseLayer(weight, bias, Activation.RELU), x), [0.0, 3.0])
    np.testing.assert_allclose(dense_forward(DenseLayer(weight, bias, Activation.TANH), x), np.tanh(x))


def test_batch_forward_matches_row_by_row():
    """Test a batch produces the same rows as single-vector calls."""
    layer = _layer(Activation.TANH)
    x = np.random.default_rng(1).standard_normal((5, 4))
    batch = dense_forward(layer, x)
    for i in range(5):
        np.testing.assert_allclose(batch[i], dense_forward(layer, x[i]))


def test_bad_input_width_is_a_shape_error():
    """Test an input of the wrong width is refused."""
    with pytest.raises(ShapeError):
        dense_forward(_layer(Activation.LINEAR), np.zeros(5))


def test_initialization_is_seeded_with_zero_bias():
    """Test the same seed gives the same weights and biases start at zero."""
    a = _layer(Activation.RELU, seed=3)
    b = _layer(Activation.RELU, seed=3)
    np.testing.assert_array_equal(a.weight, b.weight)
    assert not a.bias.any()
    limit = np.sqrt(6.0 / 7.0)
    assert np.all(np.abs(a.weight) <= limit)


@pytest.mark.parametrize("activation", list(Activation))
def test_weight_gradient_matches_finite_differences(activation):
    """Test dense_backward's weight gradient for every activation."""
    layer = _layer(activation)
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 4))
    upstream = rng.standard_normal((3, 3))
    assert grad_check(_weight_fn(layer, x, upstream), layer.weight.reshape(-1)) < TOLERANCE


@pytest.mark.parametrize("activation", [Activation.LINEAR, Activation.TANH])
def test_input_gradient_matches_finite_differences(activation):
    """Test dense_backward's input gradient on a single vector."""
    layer = _layer(activation)
    rng = np.random.default_rng(6)
    assert grad_check(_input_fn(layer, rng.standard_normal(3)), rng.standard_normal(4)) < TOLERANCE


def test_bias_gradient_sums_over_batch():
    """Test the bias gradient of a linear layer is the summed upstream gradient."""
    layer = _layer(Activation.LINEAR)
    upstream = np.ones((4, 3))
    _, grad_b, _ = dense_backward(layer, np.zeros((4, 4)), upstream)
    np.testing.assert_allclose(grad_b, [4.0, 4.0, 4.0])


def test_mse_value_and_gradient():
    """Test the MSE is the mean over every entry and its gradients are opposite."""
    pred = np.array([[1.0, 2.0], [3.0, 4.0]])
    target = np.array([[1.0, 0.0], [3.0, 2.0]])
    result = mse_loss(pred, target)
    assert result.loss == pytest.approx(2.0)
    np.testing.assert_allclose(result.grads[0], [[0.0, 1.0], [0.0, 1.0]])
    np.testing.assert_allclose(result.grads[1], -result.grads[0])


def test_mse_shape_mismatch():
    """Test mismatched shapes raise ShapeError."""
    with pytest.raises(ShapeError):
        mse_loss(np.zeros(2), np.zeros(3))


def test_mse_gradient_matches_finite_differences():
    """Test the MSE prediction gradient numerically."""
    target = np.random.default_rng(2).standard_normal(6)

    def fn(pred):
        result = mse_loss(pred, target)
        return result.loss, result.grads[0]

    assert grad_check(fn, np.random.default_rng(3).standard_normal(6)) < TOLERANCE


def test_triplet_loss_active_hinge():
    """Test d(a,p) - d(a,n) + alpha when the margin is violated."""
    a = np.zeros(2)
    p = np.array([3.0, 4.0])
    n = np.array([1.0, 0.0])
    assert triplet_loss(a, p, n, alpha=1.0).loss == pytest.approx(5.0)


def test_triplet_loss_satisfied_margin_is_zero():
    """Test a satisfied margin gives zero loss and zero gradients."""
    a = np.zeros(2)
    p = np.array([0.1, 0.0])
    n = np.array([5.0, 0.0])
    result = triplet_loss(a, p, n, alpha=1.0)
    assert result.loss == 0.0
    for grad in result.grads:
        assert not grad.any()


def test_triplet_loss_zero_margin_identical_points():
    """Test alpha = 0 with identical anchor and positive is on the boundary: loss 0."""
    a = np.array([1.0, 1.0])
    result = triplet_loss(a, a.copy(), np.array([2.0, 1.0]), alpha=0.0)
    assert result.loss == 0.0


def test_triplet_loss_negative_margin_is_refused():
    """Test a negative margin raises."""
    with pytest.raises(ShapeError):
        triplet_loss(np.zeros(2), np.ones(2), np.ones(2), alpha=-0.5)


@pytest.mark.parametrize("role", [0, 1, 2])
def test_triplet_gradients_match_finite_differences(role):
    """Test the anchor, positive and negative gradients numerically."""
    rng = np.random.default_rng(10 + role)
    vectors = [rng.standard_normal(5) for _ in range(3)]
    alpha = 10.0

    def fn(point):
        args = list(vectors)
        args[role] = point
        result = triplet_loss(*args, alpha=alpha)
        return result.loss, result.grads[role]

    assert grad_check(fn, vectors[role]) < TOLERANCE


def test_batch_triplet_loss_is_row_mean():
    """Test the batch loss averages per-row losses and scales gradients by 1/batch."""
    rng = np.random.default_rng(4)
    a, p, n = (rng.standard_normal((4, 3)) for _ in range(3))
    batch = batch_triplet_loss(a, p, n, 2.0)
    rows = [triplet_loss(a[i], p[i], n[i], 2.0) for i in range(4)]
    assert batch.loss == pytest.approx(np.mean([r.loss for r in rows]))
    np.testing.assert_allclose(batch.grads[0][2], rows[2].grads[0] / 4)
