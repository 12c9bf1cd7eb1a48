"""Binary model checkpoints.

Layout, all little-endian::

    8 bytes   magic  b"MAVGCKPT"
    uint32    format version (1)
    uint32    activation (0 = sigmoid, 1 = tanh)
    uint32    number of layer dims
    uint32[]  layer dims, input first
    uint64    parameter count
    float64[] parameters in :class:`~modelavg.nnet.params.ParamVector` order
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from .network import Activation, LayerParams, MlpModel
from .params import ParamVector, flatten, param_count, unflatten

MAGIC = b"MAVGCKPT"
VERSION = 1

_ACTIVATION_CODES = {Activation.SIGMOID: 0, Activation.TANH: 1}
_CODE_ACTIVATIONS = {code: act for act, code in _ACTIVATION_CODES.items()}


def encode_model(model: MlpModel) -> bytes:
    dims = model.layer_dims
    header = MAGIC + struct.pack(
        f"<III{len(dims)}IQ",
        VERSION,
        _ACTIVATION_CODES[model.activation],
        len(dims),
        *dims,
        model.num_params,
    )
    return header + flatten(model).data.astype("<f8").tobytes()


def decode_model(blob: bytes, *, source: str = "<bytes>") -> MlpModel:
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{source!r}: not a model checkpoint (bad magic)")
    offset = len(MAGIC)
    try:
        version, act_code, n_dims = struct.unpack_from("<III", blob, offset)
        offset += 12
        if version != VERSION:
            raise CheckpointError(f"{source!r}: unsupported checkpoint version {version}")
        dims = struct.unpack_from(f"<{n_dims}I", blob, offset)
        offset += 4 * n_dims
        (count,) = struct.unpack_from("<Q", blob, offset)
        offset += 8
    except struct.error as exc:
        raise CheckpointError(f"{source!r}: truncated header") from exc

    if n_dims < 2 or 0 in dims:
        raise CheckpointError(f"{source!r}: invalid layer dims {list(dims)}")
    activation = _CODE_ACTIVATIONS.get(act_code)
    if activation is None:
        raise CheckpointError(f"{source!r}: unknown activation code {act_code}")
    if count != param_count(dims):
        raise CheckpointError(
            f"{source!r}: header declares {count} parameters, dims {list(dims)} need"
            f" {param_count(dims)}"
        )
    payload = blob[offset:]
    if len(payload) != 8 * count:
        raise CheckpointError(
            f"{source!r}: expected {8 * count} bytes of parameters, found {len(payload)}"
        )

    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    template = MlpModel(
        layer_dims=tuple(dims),
        activation=activation,
        layers=tuple(
            LayerParams(weights=np.empty((d_out, d_in)), bias=np.empty(d_out))
            for d_in, d_out in zip(dims[:-1], dims[1:])
        ),
    )
    return unflatten(ParamVector(data=data, layer_dims=tuple(dims)), template)


def save_model(path: str | Path, model: MlpModel) -> Path:
    path = Path(path)
    path.write_bytes(encode_model(model))
    return path


def load_model(path: str | Path) -> MlpModel:
    path = Path(path)
    return decode_model(path.read_bytes(), source=str(path))
