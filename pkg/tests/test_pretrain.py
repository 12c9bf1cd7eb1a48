import math

import numpy as np
import pytest

from modelavg.errors import ShapeError
from modelavg.linalg import Rng
from modelavg.nnet import Activation, init_random
from modelavg.pretrain import (
    RbmParams,
    VisibleKind,
    cd1_update,
    greedy_pretrain,
    hidden_probs,
    init_rbm,
    reconstruction_error,
    train_rbm,
    visible_mean,
)


# -- helpers ----------------------------------------------------------------

class _Threshold:
    """Deterministic stand-in for sampling: a unit is on when its probability is >= 0.5."""

    def bernoulli(self, probs):
        return (probs >= 0.5).astype(np.float64)


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def _prototypes(seed, rows=200, flip=0.05):
    rng = Rng(seed)
    base = np.array([[1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1]], dtype=np.float64)
    data = base[rng.permutation(rows) % 2]
    noise = rng.bernoulli(np.full(data.shape, flip))
    return np.abs(data - noise)


# -- cd1_update -----------------------------------------------------------------

class TestCd1Update:
    def test_hand_computed_zero_weights(self):
        rbm = RbmParams(
            weights=np.zeros((1, 2)), v_bias=np.zeros(2), h_bias=np.zeros(1),
            visible_kind=VisibleKind.BERNOULLI,
        )
        out = cd1_update(rbm, np.array([[1.0, 0.0]]), 1.0, _Threshold())
        # h0 = 0.5, sample 1, v1 = [0.5, 0.5], h1 = 0.5
        np.testing.assert_array_equal(out.weights, [[0.25, -0.25]])
        np.testing.assert_array_equal(out.v_bias, [0.5, -0.5])
        np.testing.assert_array_equal(out.h_bias, [0.0])

    def test_hand_computed_2x1(self):
        rbm = RbmParams(
            weights=np.array([[1.0, -1.0]]), v_bias=np.zeros(2), h_bias=np.zeros(1),
            visible_kind=VisibleKind.BERNOULLI,
        )
        lr = 0.5
        out = cd1_update(rbm, np.array([[1.0, 1.0]]), lr, _Threshold())

        h0 = _sigmoid(0.0)
        v1 = [_sigmoid(1.0), _sigmoid(-1.0)]
        h1 = _sigmoid(v1[0] - v1[1])
        expected_w = [1.0 + lr * (h0 - h1 * v1[0]), -1.0 + lr * (h0 - h1 * v1[1])]
        np.testing.assert_allclose(out.weights, [expected_w], rtol=1e-14)
        np.testing.assert_allclose(out.v_bias, [lr * (1 - v1[0]), lr * (1 - v1[1])], rtol=1e-14)
        np.testing.assert_allclose(out.h_bias, [lr * (h0 - h1)], rtol=1e-14)

    def test_fixed_point_when_reconstruction_is_exact(self):
        v0 = np.array([[0.3, -1.2, 2.0]] * 4)
        rbm = RbmParams(
            weights=np.zeros((2, 3)), v_bias=v0[0].copy(), h_bias=np.zeros(2),
            visible_kind=VisibleKind.GAUSSIAN,
        )
        out = cd1_update(rbm, v0, 0.1, Rng(0))
        np.testing.assert_array_equal(out.weights, rbm.weights)
        np.testing.assert_array_equal(out.v_bias, rbm.v_bias)
        np.testing.assert_array_equal(out.h_bias, rbm.h_bias)

    def test_batch_width_mismatch(self):
        rbm = init_rbm(3, 2, VisibleKind.BERNOULLI, Rng(0))
        with pytest.raises(ShapeError):
            cd1_update(rbm, np.zeros((2, 4)), 0.1, Rng(0))


def test_visible_mean_kinds():
    gaussian = RbmParams(
        weights=np.array([[2.0]]), v_bias=np.array([1.0]), h_bias=np.zeros(1),
        visible_kind=VisibleKind.GAUSSIAN,
    )
    bernoulli = RbmParams(
        weights=gaussian.weights, v_bias=gaussian.v_bias, h_bias=gaussian.h_bias,
        visible_kind=VisibleKind.BERNOULLI,
    )
    h = np.array([[1.0]])
    assert visible_mean(gaussian, h)[0, 0] == 3.0
    assert visible_mean(bernoulli, h)[0, 0] == pytest.approx(_sigmoid(3.0))
    assert hidden_probs(gaussian, np.array([[0.5]]))[0, 0] == pytest.approx(_sigmoid(1.0))


def test_rbm_params_validate_shapes():
    with pytest.raises(ShapeError):
        RbmParams(
            weights=np.zeros((2, 3)), v_bias=np.zeros(2), h_bias=np.zeros(2),
            visible_kind=VisibleKind.BERNOULLI,
        )


# -- training -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_training_lowers_reconstruction_error(seed):
    data = _prototypes(seed)
    rbm = init_rbm(6, 4, VisibleKind.BERNOULLI, Rng(seed))
    before = reconstruction_error(rbm, data)
    trained = train_rbm(rbm, data, epochs=50, lr=0.1, batch_size=20, rng=Rng(seed + 1))
    assert reconstruction_error(trained, data) < before


def test_train_rbm_is_deterministic():
    data = _prototypes(0)
    rbm = init_rbm(6, 4, VisibleKind.BERNOULLI, Rng(0))
    a = train_rbm(rbm, data, epochs=3, lr=0.1, batch_size=20, rng=Rng(5))
    b = train_rbm(rbm, data, epochs=3, lr=0.1, batch_size=20, rng=Rng(5))
    np.testing.assert_array_equal(a.weights, b.weights)


# -- greedy stack ---------------------------------------------------------------

def test_greedy_pretrain_builds_full_stack():
    data = Rng(0).normal((64, 5))
    model = greedy_pretrain((5, 6, 4, 3), data, 2, Rng(1), batch_size=16)
    assert model.layer_dims == (5, 6, 4, 3)
    assert model.activation is Activation.SIGMOID
    assert [layer.weights.shape for layer in model.layers] == [(6, 5), (4, 6), (3, 4)]


def test_zero_epochs_returns_the_initial_draws():
    dims = (5, 6, 4, 3)
    data = Rng(0).normal((32, 5))
    model = greedy_pretrain(dims, data, 0, Rng(8))

    rng = Rng(8)
    w1 = rng.normal((6, 5), stddev=0.01)
    w2 = rng.normal((4, 6), stddev=0.01)
    out = init_random((4, 3), Activation.SIGMOID, rng).layers[0]
    np.testing.assert_array_equal(model.layers[0].weights, w1)
    np.testing.assert_array_equal(model.layers[1].weights, w2)
    np.testing.assert_array_equal(model.layers[2].weights, out.weights)
    for layer in model.layers:
        np.testing.assert_array_equal(layer.bias, 0.0)


def test_no_hidden_layers_is_random_output_only():
    model = greedy_pretrain((5, 3), Rng(0).normal((10, 5)), 3, Rng(2))
    expected = init_random((5, 3), Activation.SIGMOID, Rng(2))
    np.testing.assert_array_equal(model.layers[0].weights, expected.layers[0].weights)


def test_greedy_pretrain_checks_data_width():
    with pytest.raises(ShapeError):
        greedy_pretrain((5, 4, 3), np.zeros((10, 6)), 1, Rng(0))
