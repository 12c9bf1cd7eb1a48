from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from ..linalg import Vector
from .network import LayerParams, MlpModel


@dataclass(frozen=True)
class ParamVector:
    """All model parameters as one flat vector.

    Canonical layout: layer 0 weights (row-major), layer 0 bias, layer 1
    weights, layer 1 bias, and so on.
    """

    data: Vector
    layer_dims: tuple[int, ...]

    def __len__(self) -> int:
        return self.data.size


def param_count(layer_dims: tuple[int, ...]) -> int:
    return sum(d_out * d_in + d_out for d_in, d_out in zip(layer_dims[:-1], layer_dims[1:]))


def flatten(model: MlpModel) -> ParamVector:
    parts = []
    for layer in model.layers:
        parts.append(layer.weights.ravel(order="C"))
        parts.append(layer.bias)
    return ParamVector(data=np.concatenate(parts), layer_dims=model.layer_dims)


def unflatten(pv: ParamVector, template: MlpModel) -> MlpModel:
    """Rebuild a model shaped like *template* from *pv* (the data is copied)."""
    expected = template.num_params
    if pv.data.ndim != 1 or pv.data.size != expected:
        raise ShapeError(
            f"vector of length {pv.data.size} does not fit a model with {expected} parameters",
            op="unflatten",
            shapes=[pv.data.shape, (expected,)],
        )
    layers = []
    offset = 0
    for layer in template.layers:
        n_w = layer.weights.size
        weights = pv.data[offset : offset + n_w].reshape(layer.weights.shape).copy()
        offset += n_w
        bias = pv.data[offset : offset + layer.d_out].copy()
        offset += layer.d_out
        layers.append(LayerParams(weights=weights, bias=bias))
    return MlpModel(
        layer_dims=template.layer_dims,
        activation=template.activation,
        layers=tuple(layers),
    )
