"""Kronecker-factored natural-gradient preconditioning.

For every layer two running second-moment estimates are kept: ``r_in``
over the layer's input activations and ``r_out`` over the derivatives
back-propagated into its pre-activations.  Their smoothed inverses
approximate the inverse Fisher matrix of the layer's weights, and the
preconditioned gradient is rescaled to the raw gradient's Frobenius norm
so the learning rate keeps its meaning.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ShapeError
from ..linalg import Matrix, cholesky_solve, frobenius_norm
from ..nnet import ForwardTrace, GradientSet, LayerParams, MlpModel

LAMBDA_FLOOR = 1e-8
_NORM_FLOOR = 1e-20


@dataclass(frozen=True)
class NgState:
    r_in: tuple[Matrix, ...]
    r_out: tuple[Matrix, ...]
    decay: float = 0.95
    alpha: float = 4.0
    update_period: int = 1
    update_count: int = 0
    calls: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.decay < 1.0:
            raise ValueError(f"decay must be in (0, 1), got {self.decay!r}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if self.update_period < 1:
            raise ValueError(f"update_period must be >= 1, got {self.update_period!r}")
        if len(self.r_in) != len(self.r_out):
            raise ShapeError(
                f"{len(self.r_in)} input factors and {len(self.r_out)} output factors",
                op="NgState",
            )

    @classmethod
    def zeros(
        cls,
        model: MlpModel,
        *,
        decay: float = 0.95,
        alpha: float = 4.0,
        update_period: int = 1,
    ) -> NgState:
        return cls(
            r_in=tuple(np.zeros((layer.d_in, layer.d_in)) for layer in model.layers),
            r_out=tuple(np.zeros((layer.d_out, layer.d_out)) for layer in model.layers),
            decay=decay,
            alpha=alpha,
            update_period=update_period,
        )


def _second_moment(x: Matrix) -> Matrix:
    m = (x.T @ x) / x.shape[0]
    return 0.5 * (m + m.T)


def ng_update_state(state: NgState, trace: ForwardTrace, grads: GradientSet) -> NgState:
    """Fold one minibatch into the running factor estimates.

    The first update replaces the zero initial state outright; later ones
    are exponential moving averages with weight ``decay`` on the past.
    """
    if trace.batch_size < 1:
        raise ShapeError("empty minibatch", op="ng_update_state")
    if trace.depth != len(state.r_in) or len(grads.deltas) != len(state.r_in):
        raise ShapeError(
            f"state has {len(state.r_in)} layers, trace {trace.depth},"
            f" derivatives {len(grads.deltas)}",
            op="ng_update_state",
        )

    calls = state.calls + 1
    if (calls - 1) % state.update_period != 0:
        return replace(state, calls=calls)

    rho = state.decay if state.update_count > 0 else 0.0
    r_in = []
    r_out = []
    for i, (old_in, old_out) in enumerate(zip(state.r_in, state.r_out)):
        a = trace.activations[i]
        d = grads.deltas[i]
        if a.shape[1] != old_in.shape[0] or d.shape[1] != old_out.shape[0]:
            raise ShapeError(
                f"layer {i}: inputs {a.shape} / derivatives {d.shape} do not match"
                f" factors {old_in.shape} / {old_out.shape}",
                op="ng_update_state",
                shapes=[a.shape, old_in.shape, d.shape, old_out.shape],
            )
        r_in.append(rho * old_in + (1.0 - rho) * _second_moment(a))
        r_out.append(rho * old_out + (1.0 - rho) * _second_moment(d))
    return replace(
        state,
        r_in=tuple(r_in),
        r_out=tuple(r_out),
        update_count=state.update_count + 1,
        calls=calls,
    )


def smoothed_factor(r: Matrix, alpha: float) -> Matrix:
    """``R + lambda I`` with ``lambda = alpha * tr(R) / dim``, floored at 1e-8."""
    dim = r.shape[0]
    lam = max(alpha * float(np.trace(r)) / dim, LAMBDA_FLOOR)
    return r + lam * np.eye(dim)


def apply_kronecker_inverse(g: Matrix, s_out: Matrix, s_in: Matrix) -> Matrix:
    """Unscaled ``s_out^-1 @ g @ s_in^-1``."""
    left = cholesky_solve(s_out, g)
    return cholesky_solve(s_in, left.T).T


def _rescale(raw: np.ndarray, reference: np.ndarray) -> np.ndarray:
    gamma = frobenius_norm(reference) / max(frobenius_norm(raw), _NORM_FLOOR)
    return gamma * raw


def ng_precondition(state: NgState, grads: GradientSet) -> GradientSet:
    if len(grads.layers) != len(state.r_in):
        raise ShapeError(
            f"{len(grads.layers)} gradient layers for a {len(state.r_in)}-layer state",
            op="ng_precondition",
        )
    layers = []
    for i, (grad, r_in, r_out) in enumerate(zip(grads.layers, state.r_in, state.r_out)):
        if grad.weights.shape != (r_out.shape[0], r_in.shape[0]):
            raise ShapeError(
                f"layer {i} gradient {grad.weights.shape} does not match factors"
                f" {r_out.shape} x {r_in.shape}",
                op="ng_precondition",
                shapes=[grad.weights.shape, r_out.shape, r_in.shape],
            )
        s_in = smoothed_factor(r_in, state.alpha)
        s_out = smoothed_factor(r_out, state.alpha)
        weights = apply_kronecker_inverse(grad.weights, s_out, s_in)
        bias = cholesky_solve(s_out, grad.bias)
        layers.append(
            LayerParams(
                weights=_rescale(weights, grad.weights),
                bias=_rescale(bias, grad.bias),
            )
        )
    return GradientSet(layers=tuple(layers), deltas=grads.deltas)
