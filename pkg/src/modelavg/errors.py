"""Exception hierarchy shared by every modelavg module.

Each error subclasses :class:`ValueError` (or :class:`RuntimeError` for
worker failures) so callers can keep using the builtin types, and carries
the structured fields that name what went wrong.
"""

from __future__ import annotations

from typing import Sequence


class ModelAvgError(Exception):
    """Root of all errors raised by modelavg."""


class ShapeError(ModelAvgError, ValueError):
    """Operand shapes do not agree."""

    def __init__(self, message: str, *, op: str, shapes: Sequence[tuple[int, ...]] = ()) -> None:
        super().__init__(f"{op}: {message}")
        self.op = op
        self.shapes = tuple(tuple(s) for s in shapes)


class NotPositiveDefiniteError(ModelAvgError, ValueError):
    def __init__(self, pivot: int) -> None:
        super().__init__(f"matrix is not positive definite (pivot {pivot})")
        self.pivot = pivot


class NonFiniteError(ModelAvgError, ValueError):
    def __init__(self, message: str, *, layer: int) -> None:
        super().__init__(f"layer {layer}: {message}")
        self.layer = layer


class LabelError(ModelAvgError, ValueError):
    def __init__(
        self, *, index: int, label: float, num_classes: int, problem: str | None = None,
    ) -> None:
        problem = problem or f"is outside [0, {num_classes})"
        super().__init__(f"label {label!r} at row {index} {problem}")
        self.index = index
        self.label = label
        self.num_classes = num_classes


class DataFormatError(ModelAvgError, ValueError):
    def __init__(self, message: str, *, path: str, line: int | None = None) -> None:
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class ConfigError(ModelAvgError, ValueError):
    def __init__(self, message: str, *, key: str | None, line: int | None = None) -> None:
        prefix = f"{key!r}: " if key is not None else ""
        suffix = f" (line {line})" if line is not None else ""
        super().__init__(f"{prefix}{message}{suffix}")
        self.key = key
        self.line = line


class PartitionError(ModelAvgError, ValueError):
    """A dataset cannot be split, sharded or batched as requested."""


class AllReduceError(ModelAvgError, ValueError):
    def __init__(self, message: str, *, ranks: Sequence[int] = ()) -> None:
        super().__init__(message)
        self.ranks = tuple(ranks)


class WorkerError(ModelAvgError, RuntimeError):
    def __init__(self, rank: int, cause: BaseException) -> None:
        super().__init__(f"worker {rank} failed: {type(cause).__name__}: {cause}")
        self.rank = rank


class CheckpointError(ModelAvgError, ValueError):
    pass


class HarnessError(ModelAvgError, ValueError):
    pass
