"""Greedy layerwise RBM pretraining with one-step contrastive divergence.

The first RBM has Gaussian visible units (standardised input features);
deeper ones are Bernoulli-Bernoulli and are trained on the hidden
probabilities of the RBM below.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Protocol, Sequence

import numpy as np
import numpy.typing as npt
from loguru import logger
from scipy.special import expit

from .errors import ShapeError
from .linalg import Matrix, Rng, Vector, as_matrix, matmul
from .nnet import Activation, LayerParams, MlpModel, init_random

DEFAULT_LR = 0.1
DEFAULT_GAUSSIAN_LR = 0.001
DEFAULT_EPOCHS = 10
_INIT_STDDEV = 0.01


class VisibleKind(str, Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


class Sampler(Protocol):
    def bernoulli(self, probs: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]: ...


@dataclass(frozen=True)
class RbmParams:
    weights: Matrix  # (d_hidden, d_visible)
    v_bias: Vector
    h_bias: Vector
    visible_kind: VisibleKind

    def __post_init__(self) -> None:
        d_hidden, d_visible = self.weights.shape
        if self.v_bias.shape != (d_visible,) or self.h_bias.shape != (d_hidden,):
            raise ShapeError(
                f"weights {self.weights.shape} with v_bias {self.v_bias.shape} and"
                f" h_bias {self.h_bias.shape}",
                op="RbmParams",
                shapes=[self.weights.shape, self.v_bias.shape, self.h_bias.shape],
            )

    @property
    def d_visible(self) -> int:
        return self.weights.shape[1]

    @property
    def d_hidden(self) -> int:
        return self.weights.shape[0]


def init_rbm(d_visible: int, d_hidden: int, visible_kind: VisibleKind | str, rng: Rng) -> RbmParams:
    return RbmParams(
        weights=rng.normal((d_hidden, d_visible), stddev=_INIT_STDDEV),
        v_bias=np.zeros(d_visible),
        h_bias=np.zeros(d_hidden),
        visible_kind=VisibleKind(visible_kind),
    )


def hidden_probs(rbm: RbmParams, visible: Matrix) -> Matrix:
    return expit(matmul(visible, rbm.weights.T) + rbm.h_bias)


def visible_mean(rbm: RbmParams, hidden: Matrix) -> Matrix:
    """Mean of the visible units given hidden states; linear for Gaussian visibles."""
    v = matmul(hidden, rbm.weights) + rbm.v_bias
    if rbm.visible_kind is VisibleKind.BERNOULLI:
        return expit(v)
    return v


def _check_batch(rbm: RbmParams, batch: npt.ArrayLike) -> Matrix:
    v0 = as_matrix(batch)
    if v0.shape[1] != rbm.d_visible:
        raise ShapeError(
            f"batch has {v0.shape[1]} columns, RBM has {rbm.d_visible} visible units",
            op="cd1_update",
            shapes=[v0.shape, rbm.weights.shape],
        )
    return v0


def cd1_update(rbm: RbmParams, batch: npt.ArrayLike, lr: float, rng: Sampler) -> RbmParams:
    """One CD-1 step on *batch*.

    Positive statistics use the hidden probabilities given the data; the
    reconstruction is driven by a hidden sample drawn through *rng*.
    """
    v0 = _check_batch(rbm, batch)
    n = v0.shape[0]

    h0 = hidden_probs(rbm, v0)
    h0_sample = rng.bernoulli(h0)
    v1 = visible_mean(rbm, h0_sample)
    h1 = hidden_probs(rbm, v1)

    grad_w = (matmul(h0.T, v0) - matmul(h1.T, v1)) / n
    grad_v = (v0 - v1).sum(axis=0) / n
    grad_h = (h0 - h1).sum(axis=0) / n
    return RbmParams(
        weights=rbm.weights + lr * grad_w,
        v_bias=rbm.v_bias + lr * grad_v,
        h_bias=rbm.h_bias + lr * grad_h,
        visible_kind=rbm.visible_kind,
    )


def reconstruction_error(rbm: RbmParams, batch: npt.ArrayLike) -> float:
    """Mean squared error of the deterministic one-step reconstruction."""
    v0 = _check_batch(rbm, batch)
    v1 = visible_mean(rbm, hidden_probs(rbm, v0))
    return float(np.mean((v0 - v1) ** 2))


def train_rbm(
    rbm: RbmParams,
    data: Matrix,
    *,
    epochs: int,
    lr: float,
    batch_size: int,
    rng: Rng,
) -> RbmParams:
    n = data.shape[0]
    batch_size = min(batch_size, n)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            rbm = cd1_update(rbm, data[order[start : start + batch_size]], lr, rng)
        logger.debug(
            "RBM {}x{} epoch {}: reconstruction error {:.6f}",
            rbm.d_visible, rbm.d_hidden, epoch + 1, reconstruction_error(rbm, data),
        )
    return rbm


def greedy_pretrain(
    dims: Sequence[int],
    data: npt.ArrayLike,
    epochs: int,
    rng: Rng,
    *,
    activation: Activation | str = Activation.SIGMOID,
    lr: float = DEFAULT_LR,
    gaussian_lr: float = DEFAULT_GAUSSIAN_LR,
    batch_size: int = 128,
) -> MlpModel:
    """Pretrain the hidden stack of an MLP with layer dims *dims*.

    One RBM is trained per hidden layer (``len(dims) - 2`` in total); the
    output layer is initialised randomly.  Hidden weights and biases of the
    returned model are the RBM weights and hidden biases.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ShapeError(f"invalid layer dims {list(dims)!r}", op="greedy_pretrain")
    visible = as_matrix(data)
    if visible.shape[1] != dims[0]:
        raise ShapeError(
            f"data has {visible.shape[1]} columns, dims start at {dims[0]}",
            op="greedy_pretrain",
            shapes=[visible.shape, (visible.shape[0], dims[0])],
        )
    activation = Activation(activation)
    if activation is not Activation.SIGMOID:
        logger.warning("RBM weights are sigmoid-based; using them to start a {} network", activation.value)

    layers: list[LayerParams] = []
    for i, (d_visible, d_hidden) in enumerate(zip(dims[:-2], dims[1:-1])):
        kind = VisibleKind.GAUSSIAN if i == 0 else VisibleKind.BERNOULLI
        rbm = init_rbm(d_visible, d_hidden, kind, rng)
        rbm = train_rbm(
            rbm,
            visible,
            epochs=epochs,
            lr=gaussian_lr if kind is VisibleKind.GAUSSIAN else lr,
            batch_size=batch_size,
            rng=rng,
        )
        logger.info(
            "pretrained RBM {} ({}, {}x{}): reconstruction error {:.6f}",
            i, kind.value, d_visible, d_hidden, reconstruction_error(rbm, visible),
        )
        layers.append(LayerParams(weights=rbm.weights.copy(), bias=rbm.h_bias.copy()))
        visible = hidden_probs(rbm, visible)

    output = init_random(dims[-2:], activation, rng).layers[0]
    layers.append(output)
    return MlpModel(layer_dims=dims, activation=activation, layers=tuple(layers))

