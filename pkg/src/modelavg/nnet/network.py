from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
import numpy.typing as npt
from scipy.special import expit, log_softmax

from ..errors import LabelError, ShapeError
from ..linalg import Matrix, Rng, Vector, as_matrix, matmul


class Activation(str, Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"

    def apply(self, z: Matrix) -> Matrix:
        if self is Activation.SIGMOID:
            return expit(z)
        return np.tanh(z)

    def derivative(self, a: Matrix) -> Matrix:
        """Derivative expressed through the activation output *a*."""
        if self is Activation.SIGMOID:
            return a * (1.0 - a)
        return 1.0 - a * a


@dataclass(frozen=True)
class LayerParams:
    """Weights ``(d_out, d_in)`` and bias ``(d_out,)`` of one affine layer.

    Also used for per-layer gradients, which have the same shapes.
    """

    weights: Matrix
    bias: Vector

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class MlpModel:
    """Feed-forward classifier: hidden layers use *activation*, the output is softmax."""

    layer_dims: tuple[int, ...]
    activation: Activation
    layers: tuple[LayerParams, ...]

    def __post_init__(self) -> None:
        _check_dims(self.layer_dims, op="MlpModel")
        if len(self.layers) != len(self.layer_dims) - 1:
            raise ShapeError(
                f"{len(self.layers)} layers for dims {self.layer_dims}",
                op="MlpModel",
            )
        for i, layer in enumerate(self.layers):
            expected = (self.layer_dims[i + 1], self.layer_dims[i])
            if layer.weights.shape != expected or layer.bias.shape != (expected[0],):
                raise ShapeError(
                    f"layer {i} has weights {layer.weights.shape} and bias"
                    f" {layer.bias.shape}, expected {expected}",
                    op="MlpModel",
                    shapes=[layer.weights.shape, expected],
                )

    @property
    def num_params(self) -> int:
        return sum(layer.weights.size + layer.bias.size for layer in self.layers)

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]


@dataclass(frozen=True)
class GradientSet:
    """Gradients of the mean cross-entropy, one :class:`LayerParams` per layer.

    ``deltas[l]`` holds the per-example derivative of the loss with respect
    to layer *l*'s pre-activations, shape ``(B, d_out)``.  It is not scaled
    by ``1/B`` and is what the natural-gradient statistics consume.
    """

    layers: tuple[LayerParams, ...]
    deltas: tuple[Matrix, ...] = ()


@dataclass(frozen=True)
class ForwardTrace:
    """Per-layer activations for one minibatch.

    ``activations[0]`` is the input and ``activations[l + 1]`` is the output
    of layer *l*; the last entry holds the softmax probabilities.
    """

    activations: tuple[Matrix, ...]
    pre_activations: tuple[Matrix, ...]
    log_probs: Matrix

    @property
    def depth(self) -> int:
        return len(self.pre_activations)

    @property
    def batch_size(self) -> int:
        return self.activations[0].shape[0]

    @property
    def probs(self) -> Matrix:
        return self.activations[-1]


def _check_dims(dims: Sequence[int], *, op: str) -> None:
    if len(dims) < 2 or any(int(d) <= 0 for d in dims):
        raise ShapeError(
            f"layer dims must be at least two positive counts, got {list(dims)!r}",
            op=op,
        )


def init_random(dims: Sequence[int], activation: Activation | str, rng: Rng) -> MlpModel:
    """Uniform Glorot initialisation, ``r = sqrt(6 / (d_in + d_out))``, zero biases."""
    _check_dims(dims, op="init_random")
    dims = tuple(int(d) for d in dims)
    layers = []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        r = math.sqrt(6.0 / (d_in + d_out))
        layers.append(
            LayerParams(weights=rng.uniform(-r, r, (d_out, d_in)), bias=np.zeros(d_out))
        )
    return MlpModel(layer_dims=dims, activation=Activation(activation), layers=tuple(layers))


def forward(model: MlpModel, inputs: npt.ArrayLike) -> ForwardTrace:
    a = as_matrix(inputs)
    if a.shape[1] != model.layer_dims[0]:
        raise ShapeError(
            f"inputs have {a.shape[1]} columns, model expects {model.layer_dims[0]}",
            op="forward",
            shapes=[a.shape, (a.shape[0], model.layer_dims[0])],
        )
    activations = [a]
    pre_activations = []
    last = len(model.layers) - 1
    log_probs = a
    for i, layer in enumerate(model.layers):
        z = matmul(a, layer.weights.T) + layer.bias
        pre_activations.append(z)
        if i == last:
            log_probs = log_softmax(z, axis=1)
            a = np.exp(log_probs)
        else:
            a = model.activation.apply(z)
        activations.append(a)
    return ForwardTrace(
        activations=tuple(activations),
        pre_activations=tuple(pre_activations),
        log_probs=log_probs,
    )


def _check_labels(labels: npt.ArrayLike, rows: int, num_classes: int) -> npt.NDArray[np.int64]:
    y = np.asarray(labels)
    if y.shape != (rows,):
        raise ShapeError(
            f"labels of shape {y.shape} for a batch of {rows}",
            op="labels",
            shapes=[y.shape, (rows,)],
        )
    if y.dtype.kind == "f":
        fractional = np.flatnonzero(y != np.round(y))
        if fractional.size:
            i = int(fractional[0])
            raise LabelError(index=i, label=float(y[i]), num_classes=num_classes, problem="is not an integer")
    y = y.astype(np.int64)
    bad = np.flatnonzero((y < 0) | (y >= num_classes))
    if bad.size:
        i = int(bad[0])
        raise LabelError(index=i, label=int(y[i]), num_classes=num_classes)
    return y


def cross_entropy(trace: ForwardTrace, labels: npt.ArrayLike) -> float:
    """Mean negative log-probability of the correct class."""
    y = _check_labels(labels, trace.batch_size, trace.log_probs.shape[1])
    return float(-np.mean(trace.log_probs[np.arange(y.size), y]))


def backward(model: MlpModel, trace: ForwardTrace, labels: npt.ArrayLike) -> GradientSet:
    """Gradients of :func:`cross_entropy` with respect to every parameter."""
    if trace.depth != len(model.layers) or any(
        a.shape[1] != d for a, d in zip(trace.activations, model.layer_dims)
    ):
        raise ShapeError(
            "trace was not produced by this model",
            op="backward",
            shapes=[tuple(a.shape[1] for a in trace.activations), model.layer_dims],
        )
    y = _check_labels(labels, trace.batch_size, model.num_classes)
    batch = trace.batch_size

    delta = trace.probs.copy()
    delta[np.arange(batch), y] -= 1.0

    grads: list[LayerParams] = []
    deltas: list[Matrix] = []
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        deltas.append(delta)
        grads.append(
            LayerParams(
                weights=matmul(delta.T, trace.activations[i]) / batch,
                bias=delta.mean(axis=0),
            )
        )
        if i > 0:
            delta = matmul(delta, layer.weights) * model.activation.derivative(
                trace.activations[i]
            )
    grads.reverse()
    deltas.reverse()
    return GradientSet(layers=tuple(grads), deltas=tuple(deltas))


def predict(model: MlpModel, inputs: npt.ArrayLike) -> npt.NDArray[np.int64]:
    return np.argmax(forward(model, inputs).probs, axis=1)


def accuracy(model: MlpModel, features: npt.ArrayLike, labels: npt.ArrayLike) -> float:
    """Fraction of rows whose most probable class equals the label (frame accuracy)."""
    y = np.asarray(labels)
    if y.size == 0:
        return 0.0
    return float(np.mean(predict(model, features) == y))
