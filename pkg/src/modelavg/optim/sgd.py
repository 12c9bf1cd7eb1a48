from __future__ import annotations

import numpy as np

from ..errors import NonFiniteError, ShapeError
from ..nnet import GradientSet, LayerParams, MlpModel


def sgd_step(model: MlpModel, grads: GradientSet, lr: float) -> MlpModel:
    """Descend one step: ``p <- p - lr * grad`` for every parameter.

    *grads* holds loss gradients, so this is the ascent update
    ``theta + lr * g`` with ``g = -grad``.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr!r}")
    if len(grads.layers) != len(model.layers):
        raise ShapeError(
            f"{len(grads.layers)} gradient layers for a {len(model.layers)}-layer model",
            op="sgd_step",
        )
    layers = []
    for i, (layer, grad) in enumerate(zip(model.layers, grads.layers)):
        if grad.weights.shape != layer.weights.shape or grad.bias.shape != layer.bias.shape:
            raise ShapeError(
                f"layer {i} gradient {grad.weights.shape} does not match weights"
                f" {layer.weights.shape}",
                op="sgd_step",
                shapes=[grad.weights.shape, layer.weights.shape],
            )
        if not (np.all(np.isfinite(grad.weights)) and np.all(np.isfinite(grad.bias))):
            raise NonFiniteError("gradient has non-finite entries", layer=i)
        layers.append(
            LayerParams(
                weights=layer.weights - lr * grad.weights,
                bias=layer.bias - lr * grad.bias,
            )
        )
    return MlpModel(layer_dims=model.layer_dims, activation=model.activation, layers=tuple(layers))
