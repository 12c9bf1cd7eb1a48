import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modelavg.errors import LabelError, ShapeError
from modelavg.linalg import Rng
from modelavg.nnet import (
    Activation,
    LayerParams,
    MlpModel,
    ParamVector,
    accuracy,
    backward,
    cross_entropy,
    flatten,
    forward,
    init_random,
    param_count,
    predict,
    unflatten,
)


# -- helpers ----------------------------------------------------------------

def _batch(seed, rows=6, dim=5, classes=3):
    rng = Rng(seed)
    x = rng.normal((rows, dim))
    y = rng.permutation(rows) % classes
    return x, y


def _loss_at(template, data, x, y):
    model = unflatten(ParamVector(data=data, layer_dims=template.layer_dims), template)
    return cross_entropy(forward(model, x), y)


def _numeric_gradient(model, x, y, eps=1e-5):
    theta = flatten(model).data
    grad = np.empty_like(theta)
    for i in range(theta.size):
        plus = theta.copy()
        minus = theta.copy()
        plus[i] += eps
        minus[i] -= eps
        grad[i] = (_loss_at(model, plus, x, y) - _loss_at(model, minus, x, y)) / (2 * eps)
    return grad


def _flat_grads(grads, dims):
    model = MlpModel(layer_dims=dims, activation=Activation.SIGMOID, layers=grads.layers)
    return flatten(model).data


# -- gradient correctness -----------------------------------------------------

@pytest.mark.parametrize("activation", [Activation.SIGMOID, Activation.TANH])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_backward_matches_finite_differences(activation, seed):
    dims = (5, 8, 4, 3)
    model = init_random(dims, activation, Rng(seed))
    x, y = _batch(seed + 100)
    analytic = _flat_grads(backward(model, forward(model, x), y), dims)
    numeric = _numeric_gradient(model, x, y)
    rel = np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
    assert rel.max() < 1e-6


def test_batch_gradient_is_mean_of_per_example_gradients():
    dims = (5, 8, 4, 3)
    model = init_random(dims, Activation.SIGMOID, Rng(3))
    x, y = _batch(4)
    batch = _flat_grads(backward(model, forward(model, x), y), dims)
    singles = [
        _flat_grads(backward(model, forward(model, x[i : i + 1]), y[i : i + 1]), dims)
        for i in range(len(y))
    ]
    np.testing.assert_allclose(batch, np.mean(singles, axis=0), atol=1e-12)


def test_deltas_are_unscaled_per_example():
    dims = (5, 4, 3)
    model = init_random(dims, Activation.SIGMOID, Rng(5))
    x, y = _batch(6)
    trace = forward(model, x)
    grads = backward(model, trace, y)
    assert [d.shape for d in grads.deltas] == [(6, 4), (6, 3)]
    expected = trace.probs.copy()
    expected[np.arange(6), y] -= 1.0
    np.testing.assert_allclose(grads.deltas[-1], expected)


# -- forward / loss -----------------------------------------------------------

@given(seed=st.integers(0, 2**32), rows=st.integers(1, 20))
@settings(max_examples=25, deadline=None)
def test_softmax_rows_are_distributions(seed, rows):
    model = init_random((4, 6, 5), Activation.TANH, Rng(seed))
    trace = forward(model, Rng(seed + 1).normal((rows, 4), stddev=10.0))
    assert np.all(trace.probs >= 0)
    np.testing.assert_allclose(trace.probs.sum(axis=1), 1.0, atol=1e-12)


def test_trace_layout():
    model = init_random((5, 8, 4, 3), Activation.SIGMOID, Rng(0))
    x, _ = _batch(0)
    trace = forward(model, x)
    assert trace.depth == 3
    assert trace.batch_size == 6
    assert [a.shape[1] for a in trace.activations] == [5, 8, 4, 3]
    np.testing.assert_array_equal(trace.activations[0], x)


def test_uniform_output_cross_entropy():
    layers = (LayerParams(weights=np.zeros((4, 2)), bias=np.zeros(4)),)
    model = MlpModel(layer_dims=(2, 4), activation=Activation.SIGMOID, layers=layers)
    trace = forward(model, np.ones((3, 2)))
    assert cross_entropy(trace, [0, 1, 3]) == pytest.approx(math.log(4))


def test_two_layer_hand_activations():
    hidden = LayerParams(weights=np.array([[1.0, 1.0]]), bias=np.array([math.log(3.0)]))
    output = LayerParams(weights=np.array([[4.0], [0.0]]), bias=np.zeros(2))
    model = MlpModel(layer_dims=(2, 1, 2), activation=Activation.SIGMOID, layers=(hidden, output))
    trace = forward(model, np.zeros(2))
    # sigmoid(ln 3) = 3/4, so the output logits are (3, 0)
    np.testing.assert_allclose(trace.activations[1], [[0.75]], rtol=1e-14)
    np.testing.assert_allclose(trace.pre_activations[1], [[3.0, 0.0]], rtol=1e-14, atol=1e-15)
    e3 = math.exp(3.0)
    np.testing.assert_allclose(trace.probs, [[e3 / (e3 + 1), 1 / (e3 + 1)]], rtol=1e-14)


def test_single_example_matches_batch_row():
    model = init_random((5, 8, 3), Activation.TANH, Rng(1))
    x, _ = _batch(2)
    batch = forward(model, x).probs
    for i in range(len(x)):
        single = forward(model, x[i]).probs
        np.testing.assert_array_equal(single, forward(model, x[i : i + 1]).probs)
        np.testing.assert_allclose(single[0], batch[i], rtol=0, atol=1e-12)


def test_output_bias_gradient_vanishes_at_symmetric_point():
    layers = (
        LayerParams(weights=np.zeros((4, 3)), bias=np.zeros(4)),
        LayerParams(weights=np.zeros((3, 4)), bias=np.zeros(3)),
    )
    model = MlpModel(layer_dims=(3, 4, 3), activation=Activation.SIGMOID, layers=layers)
    x = Rng(0).normal((6, 3))
    grads = backward(model, forward(model, x), [0, 1, 2, 0, 1, 2])
    np.testing.assert_allclose(grads.layers[-1].bias, 0.0, atol=1e-15)


def test_forward_rejects_wrong_width():
    model = init_random((5, 3), Activation.SIGMOID, Rng(0))
    with pytest.raises(ShapeError):
        forward(model, np.zeros((2, 4)))


class TestLabels:
    def test_out_of_range(self):
        model = init_random((5, 3), Activation.SIGMOID, Rng(0))
        trace = forward(model, np.zeros((2, 5)))
        with pytest.raises(LabelError) as info:
            cross_entropy(trace, [0, 3])
        assert info.value.index == 1
        assert info.value.label == 3

    def test_negative(self):
        model = init_random((5, 3), Activation.SIGMOID, Rng(0))
        trace = forward(model, np.zeros((2, 5)))
        with pytest.raises(LabelError):
            backward(model, trace, [-1, 0])

    def test_fractional_labels_are_rejected(self):
        model = init_random((5, 3), Activation.SIGMOID, Rng(0))
        trace = forward(model, np.zeros((2, 5)))
        with pytest.raises(LabelError, match="not an integer") as info:
            cross_entropy(trace, np.array([0.0, 1.7]))
        assert info.value.index == 1

    def test_integral_float_labels_are_accepted(self):
        model = init_random((5, 3), Activation.SIGMOID, Rng(0))
        trace = forward(model, np.zeros((2, 5)))
        assert cross_entropy(trace, np.array([0.0, 2.0])) == pytest.approx(cross_entropy(trace, [0, 2]))

    def test_length_mismatch(self):
        model = init_random((5, 3), Activation.SIGMOID, Rng(0))
        trace = forward(model, np.zeros((2, 5)))
        with pytest.raises(ShapeError):
            cross_entropy(trace, [0, 1, 2])


def test_backward_rejects_foreign_trace():
    a = init_random((5, 4, 3), Activation.SIGMOID, Rng(0))
    b = init_random((5, 6, 3), Activation.SIGMOID, Rng(0))
    with pytest.raises(ShapeError):
        backward(b, forward(a, np.zeros((2, 5))), [0, 1])


# -- init / predict -----------------------------------------------------------

def test_init_random_is_glorot_uniform():
    model = init_random((30, 20, 10), Activation.SIGMOID, Rng(9))
    for layer in model.layers:
        r = math.sqrt(6.0 / (layer.d_in + layer.d_out))
        assert np.abs(layer.weights).max() <= r
        np.testing.assert_array_equal(layer.bias, 0.0)


def test_init_random_weight_variance():
    (layer,) = init_random((500, 500), Activation.SIGMOID, Rng(4)).layers
    r = math.sqrt(6.0 / 1000)
    assert layer.weights.var() == pytest.approx(r * r / 3, rel=0.1)


def test_init_random_is_deterministic():
    a = flatten(init_random((5, 8, 3), "tanh", Rng(11))).data
    b = flatten(init_random((5, 8, 3), "tanh", Rng(11))).data
    np.testing.assert_array_equal(a, b)


def test_init_random_rejects_bad_dims():
    with pytest.raises(ShapeError):
        init_random((5,), Activation.SIGMOID, Rng(0))
    with pytest.raises(ShapeError):
        init_random((5, 0, 3), Activation.SIGMOID, Rng(0))


def test_predict_and_accuracy():
    weights = np.array([[1.0, 0.0], [0.0, 1.0]])
    model = MlpModel(
        layer_dims=(2, 2),
        activation=Activation.SIGMOID,
        layers=(LayerParams(weights=weights, bias=np.zeros(2)),),
    )
    x = np.array([[2.0, 0.0], [0.0, 2.0], [3.0, 1.0], [0.0, 1.0]])
    np.testing.assert_array_equal(predict(model, x), [0, 1, 0, 1])
    assert accuracy(model, x, [0, 1, 1, 1]) == pytest.approx(0.75)
    assert accuracy(model, np.zeros((0, 2)), []) == 0.0


# -- parameter vectors --------------------------------------------------------

def test_flatten_canonical_layout():
    w0 = np.arange(6.0).reshape(3, 2)
    b0 = np.array([10.0, 11.0, 12.0])
    w1 = np.arange(20.0, 26.0).reshape(2, 3)
    b1 = np.array([30.0, 31.0])
    model = MlpModel(
        layer_dims=(2, 3, 2),
        activation=Activation.SIGMOID,
        layers=(LayerParams(w0, b0), LayerParams(w1, b1)),
    )
    pv = flatten(model)
    expected = [0, 1, 2, 3, 4, 5, 10, 11, 12, 20, 21, 22, 23, 24, 25, 30, 31]
    np.testing.assert_array_equal(pv.data, expected)
    assert len(pv) == param_count((2, 3, 2)) == model.num_params == 17


def test_unflatten_restores_model():
    model = init_random((5, 8, 4, 3), Activation.TANH, Rng(2))
    restored = unflatten(flatten(model), model)
    assert restored.activation is Activation.TANH
    for a, b in zip(model.layers, restored.layers):
        np.testing.assert_array_equal(a.weights, b.weights)
        np.testing.assert_array_equal(a.bias, b.bias)


def test_unflatten_copies_data():
    model = init_random((2, 2), Activation.SIGMOID, Rng(0))
    pv = flatten(model)
    restored = unflatten(pv, model)
    pv.data[:] = 0.0
    assert np.any(restored.layers[0].weights != 0.0)


def test_unflatten_length_mismatch():
    model = init_random((5, 4, 3), Activation.SIGMOID, Rng(0))
    with pytest.raises(ShapeError):
        unflatten(ParamVector(data=np.zeros(model.num_params + 1), layer_dims=model.layer_dims), model)
