from __future__ import annotations

from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .data import first_flagged, read_table
from .errors import DataFormatError, HarnessError

METRICS_HEADER = ("epoch", "lr", "train_ce", "cv_accuracy", "wall_seconds", "workers", "avg_events")


@dataclass(frozen=True)
class MetricsRecord:
    """One completed epoch; ``avg_events`` counts averaging events so far."""

    epoch: int
    lr: float
    train_ce: float
    cv_accuracy: float
    wall_seconds: float
    workers: int
    avg_events: int


_FIELD_TYPES = {f.name: (int if f.type in ("int", int) else float) for f in fields(MetricsRecord)}


def write_metrics(path: str | Path, records: Iterable[MetricsRecord]) -> Path:
    path = Path(path)
    frame = pd.DataFrame([astuple(r) for r in records], columns=list(METRICS_HEADER))
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_metrics(path: str | Path) -> list[MetricsRecord]:
    path = Path(path)
    source = str(path)
    frame = read_table(path, header=True)
    if tuple(frame.columns) != METRICS_HEADER:
        raise DataFormatError(f"expected header {','.join(METRICS_HEADER)!r}", path=source, line=1)
    if frame.empty:
        return []
    frame.index = frame.index + 2

    parsed = frame.apply(pd.to_numeric, errors="coerce").astype(np.float64)
    integral = [name for name in METRICS_HEADER if _FIELD_TYPES[name] is int]
    bad = parsed.isna()
    bad[integral] = bad[integral] | parsed[integral].ne(np.floor(parsed[integral]))
    line = first_flagged(bad)
    if line is not None:
        name = bad.loc[line].idxmax()
        kind = "an integer" if _FIELD_TYPES[name] is int else "a number"
        raise DataFormatError(f"{name} value {frame[name][line]!r} is not {kind}", path=source, line=int(line))

    # exact decimal parsing; the coerced frame above is only for validation
    exact = {name: np.asarray(frame[name].to_numpy(dtype=object), dtype=np.float64) for name in METRICS_HEADER}
    return [
        MetricsRecord(**{name: _FIELD_TYPES[name](exact[name][i]) for name in METRICS_HEADER})
        for i in range(len(frame))
    ]


@dataclass(frozen=True)
class Speedup:
    speedup: float
    scaling: float


def total_wall_seconds(records: Sequence[MetricsRecord]) -> float:
    return sum(r.wall_seconds for r in records)


def compute_speedup(
    serial_metrics: Sequence[MetricsRecord], parallel_metrics: Sequence[MetricsRecord],
) -> Speedup:
    """Speedup over total training time; scaling divides it by the worker count."""
    if not serial_metrics or not parallel_metrics:
        raise HarnessError("speedup needs at least one epoch from each run")
    parallel_time = total_wall_seconds(parallel_metrics)
    if parallel_time <= 0:
        raise HarnessError(f"parallel run reports {parallel_time!r} seconds of training")
    speedup = total_wall_seconds(serial_metrics) / parallel_time
    return Speedup(speedup=speedup, scaling=speedup / parallel_metrics[0].workers)
