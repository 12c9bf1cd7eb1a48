from .checkpoint import decode_model, encode_model, load_model, save_model
from .network import (
    Activation,
    ForwardTrace,
    GradientSet,
    LayerParams,
    MlpModel,
    accuracy,
    backward,
    cross_entropy,
    forward,
    init_random,
    predict,
)
from .params import ParamVector, flatten, param_count, unflatten

__all__ = [
    "Activation",
    "LayerParams",
    "MlpModel",
    "GradientSet",
    "ForwardTrace",
    "init_random",
    "forward",
    "cross_entropy",
    "backward",
    "predict",
    "accuracy",
    "ParamVector",
    "flatten",
    "unflatten",
    "param_count",
    "encode_model",
    "decode_model",
    "save_model",
    "load_model",
]
