"""Run configuration.

A run is described by flat ``key = value`` settings.  Values come from the
defaults below, then an optional config file, then command-line flags,
each source overriding the previous one.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import ConfigError
from .nnet import Activation
from .optim import ScheduleKind
from .parallel import OptimizerKind


class InitKind(str, Enum):
    RANDOM = "random"
    RBM = "rbm"


_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}
_NONE = {"", "none"}


@dataclass(frozen=True)
class RunConfig:
    data_csv: str | None = None
    synthetic: bool = False
    synthetic_classes: int = 10
    synthetic_dim: int = 64
    synthetic_per_class: int = 2000
    synthetic_separation: float = 4.0
    hidden_layers: int = 2
    hidden_dim: int = 128
    activation: Activation = Activation.SIGMOID
    optimizer: OptimizerKind = OptimizerKind.NGSGD
    init: InitKind = InitKind.RBM
    lr_init: float = 0.32
    lr_schedule: ScheduleKind = ScheduleKind.EXPONENTIAL
    epochs: int = 15
    minibatch: int = 128
    workers: int = 1
    avg_frequency: int = 10
    cv_fraction: float = 0.10
    seed: int = 0
    scale_lr: bool = True
    ng_decay: float = 0.95
    ng_alpha: float = 4.0
    ng_update_period: int = 1
    pretrain_epochs: int = 10
    pretrain_lr: float = 0.1
    pretrain_gaussian_lr: float = 0.001
    metrics_path: str = "metrics.csv"
    checkpoint_path: str = "model.bin"
    pretrain_checkpoint_path: str | None = None
    init_checkpoint_path: str | None = None

    def __post_init__(self) -> None:
        for key in ("activation", "optimizer", "init", "lr_schedule"):
            value = getattr(self, key)
            object.__setattr__(self, key, _parse_value(key, _FIELD_TYPES[key], value))
        _validate(self)

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def describe(self) -> str:
        """The resolved settings as ``key = value`` lines that parse back to this config."""
        return "\n".join(f"{f.name} = {_render(getattr(self, f.name))}" for f in fields(self)) + "\n"

    def replace(self, key: str, value: Any) -> RunConfig:
        key = _normalise_key(key)
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown setting", key=key)
        if isinstance(value, str):
            value = _parse_value(key, _FIELD_TYPES[key], value)
        return dataclasses.replace(self, **{key: value})

    def layer_dims(self, input_dim: int, num_classes: int) -> tuple[int, ...]:
        return (input_dim, *([self.hidden_dim] * self.hidden_layers), num_classes)


_FIELD_TYPES: dict[str, Any] = typing.get_type_hints(RunConfig)

_POSITIVE = (
    "synthetic_classes", "synthetic_dim", "synthetic_per_class", "hidden_dim",
    "minibatch", "workers", "ng_update_period",
)
_NON_NEGATIVE = ("hidden_layers", "epochs", "avg_frequency", "pretrain_epochs", "seed")
_POSITIVE_REAL = ("lr_init", "ng_alpha", "pretrain_lr", "pretrain_gaussian_lr")


def _validate(config: RunConfig) -> None:
    for key in _POSITIVE:
        if getattr(config, key) < 1:
            raise ConfigError(f"must be >= 1, got {getattr(config, key)!r}", key=key)
    for key in _NON_NEGATIVE:
        if getattr(config, key) < 0:
            raise ConfigError(f"must be >= 0, got {getattr(config, key)!r}", key=key)
    for key in _POSITIVE_REAL:
        if not getattr(config, key) > 0:
            raise ConfigError(f"must be > 0, got {getattr(config, key)!r}", key=key)
    if config.synthetic_separation < 0:
        raise ConfigError(f"must be >= 0, got {config.synthetic_separation!r}", key="synthetic_separation")
    if not 0.0 < config.cv_fraction < 1.0:
        raise ConfigError(f"must be in (0, 1), got {config.cv_fraction!r}", key="cv_fraction")
    if not 0.0 < config.ng_decay < 1.0:
        raise ConfigError(f"must be in (0, 1), got {config.ng_decay!r}", key="ng_decay")
    for key in ("metrics_path", "checkpoint_path"):
        if not getattr(config, key):
            raise ConfigError("path must not be empty", key=key)
    if (config.data_csv is None) == (not config.synthetic):
        raise ConfigError(
            "set exactly one data source: a CSV path or synthetic = true", key="data_csv",
        )


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------


def _normalise_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def _parse_value(key: str, kind: Any, value: Any, line: int | None = None) -> Any:
    if not isinstance(value, str):
        return value
    text = value.strip()
    optional = type(None) in typing.get_args(kind)
    if optional:
        if text.lower() in _NONE:
            return None
        kind = next(a for a in typing.get_args(kind) if a is not type(None))

    if kind is bool:
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ConfigError(f"expected true or false, got {text!r}", key=key, line=line)
    if kind is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"expected an integer, got {text!r}", key=key, line=line) from None
    if kind is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"expected a number, got {text!r}", key=key, line=line) from None
    if isinstance(kind, type) and issubclass(kind, Enum):
        try:
            return kind(text.lower())
        except ValueError:
            choices = ", ".join(m.value for m in kind)
            raise ConfigError(f"expected one of {choices}, got {text!r}", key=key, line=line) from None
    return text


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, Any]:
    """Typed settings from a ``key = value`` file; ``#`` starts a comment."""
    path = Path(path)
    settings: dict[str, Any] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"expected 'key = value', got {text!r}", key=None, line=lineno)
            key, value = (part.strip() for part in text.split("=", 1))
            key = _normalise_key(key)
            if key not in _FIELD_TYPES:
                raise ConfigError("unknown setting", key=key, line=lineno)
            if key in settings:
                raise ConfigError("set more than once", key=key, line=lineno)
            settings[key] = _parse_value(key, _FIELD_TYPES[key], value, lineno)
    return settings


def parse_flags(args: Sequence[str]) -> dict[str, Any]:
    """Typed settings from ``--key value`` / ``--key=value`` flags.

    A boolean key given without a value is set to true.
    """
    settings: dict[str, Any] = {}
    i = 0
    while i < len(args):
        arg = args[i]
        if not arg.startswith("--"):
            raise ConfigError(f"unexpected argument {arg!r}", key=None)
        name, eq, value = arg[2:].partition("=")
        key = _normalise_key(name)
        if key not in _FIELD_TYPES:
            raise ConfigError("unknown setting", key=key)
        if not eq:
            nxt = args[i + 1] if i + 1 < len(args) else None
            if _FIELD_TYPES[key] is bool and (nxt is None or nxt.startswith("--")):
                value = "true"
            elif nxt is None:
                raise ConfigError("flag needs a value", key=key)
            else:
                value = nxt
                i += 1
        settings[key] = _parse_value(key, _FIELD_TYPES[key], value)
        i += 1
    return settings


def parse_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | Iterable[str] = (),
) -> RunConfig:
    """Resolve defaults, then the file at *path*, then *overrides*.

    *overrides* is either a mapping of settings or a list of command-line
    flags such as ``["--workers", "8"]``.
    """
    settings: dict[str, Any] = {}
    if path is not None:
        settings.update(read_config_file(path))
    if isinstance(overrides, Mapping):
        for key, value in overrides.items():
            key = _normalise_key(key)
            if key not in _FIELD_TYPES:
                raise ConfigError("unknown setting", key=key)
            settings[key] = _parse_value(key, _FIELD_TYPES[key], value)
    else:
        settings.update(parse_flags(list(overrides)))
    return RunConfig(**settings)
