from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd
from loguru import logger

from .errors import DataFormatError, LabelError, PartitionError, ShapeError
from .linalg import Matrix, Rng


@dataclass(frozen=True)
class Dataset:
    """Labelled examples: ``features`` is ``(N, D)``, ``labels`` holds class indices."""

    features: Matrix
    labels: npt.NDArray[np.int64]
    num_classes: int

    def __post_init__(self) -> None:
        if self.features.ndim != 2 or self.labels.shape != (self.features.shape[0],):
            raise ShapeError(
                f"features {self.features.shape} with labels {self.labels.shape}",
                op="Dataset",
                shapes=[self.features.shape, self.labels.shape],
            )
        if self.labels.dtype.kind == "f":
            fractional = np.flatnonzero(self.labels != np.round(self.labels))
            if fractional.size:
                i = int(fractional[0])
                raise LabelError(
                    index=i, label=float(self.labels[i]), num_classes=self.num_classes,
                    problem="is not an integer",
                )
        bad = np.flatnonzero((self.labels < 0) | (self.labels >= self.num_classes))
        if bad.size:
            i = int(bad[0])
            raise LabelError(index=i, label=int(self.labels[i]), num_classes=self.num_classes)
        rows = np.flatnonzero(~np.all(np.isfinite(self.features), axis=1))
        if rows.size:
            raise DataFormatError(f"row {int(rows[0])} has a non-finite feature", path="<dataset>")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: npt.ArrayLike) -> Dataset:
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[idx],
            labels=self.labels[idx],
            num_classes=self.num_classes,
        )


@dataclass(frozen=True)
class SplitSpec:
    cv_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.cv_fraction < 1.0:
            raise PartitionError(f"cv_fraction {self.cv_fraction!r} is outside (0, 1)")


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

_NAN_TOKENS = ("nan", "+nan", "-nan")
_PARSER_LINE = re.compile(r"line (\d+)")


def read_table(path: str | Path, *, header: bool) -> pd.DataFrame:
    """Every field of a CSV file as a stripped string; short rows are padded with NaN.

    Without a header, blank lines are kept as all-NaN rows so that row
    ``i`` is line ``i + 1`` of the file.  An empty file gives an empty frame.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            header=0 if header else None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=header,
        )
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except pd.errors.ParserError as exc:
        match = _PARSER_LINE.search(str(exc))
        raise DataFormatError(
            f"inconsistent field count ({exc})",
            path=str(path),
            line=int(match.group(1)) if match else None,
        ) from None
    if frame.empty:
        return frame
    return frame.apply(lambda column: column.str.strip())


def first_flagged(mask: pd.Series | pd.DataFrame) -> Any:
    """Index label of the first row with a true entry in *mask*, or None."""
    if isinstance(mask, pd.DataFrame):
        mask = mask.any(axis=1)
    hits = mask.index[mask.to_numpy(dtype=bool)]
    return hits[0] if len(hits) else None


def load_csv(path: str | Path) -> Dataset:
    """Read ``label,x1,...,xD`` rows; the class count is ``max(label) + 1``."""
    path = Path(path)
    source = str(path)
    frame = read_table(path, header=False)
    frame.index = frame.index + 1
    filled = frame.notna() & frame.ne("")
    frame = frame[filled.any(axis=1)]
    if frame.empty:
        raise DataFormatError("file contains no examples", path=source)

    width = frame.shape[1]
    if width < 2:
        raise DataFormatError(
            "expected a label and at least one feature", path=source, line=int(frame.index[0]),
        )
    counts = frame.notna().sum(axis=1)
    line = first_flagged(counts.ne(width))
    if line is not None:
        raise DataFormatError(f"expected {width} fields, found {counts[line]}", path=source, line=int(line))

    labels = pd.to_numeric(frame[0], errors="coerce").astype(np.float64)
    line = first_flagged(~np.isfinite(labels) | labels.ne(np.floor(labels)))
    if line is not None:
        raise DataFormatError(f"label {frame[0][line]!r} is not an integer", path=source, line=int(line))
    line = first_flagged(labels.lt(0))
    if line is not None:
        raise DataFormatError(f"label {frame[0][line]!r} is negative", path=source, line=int(line))

    raw = frame.iloc[:, 1:]
    numeric = raw.apply(pd.to_numeric, errors="coerce").astype(np.float64)
    nan_text = raw.apply(lambda column: column.str.lower().isin(_NAN_TOKENS))
    non_numeric = numeric.isna() & ~nan_text
    line = first_flagged(non_numeric)
    if line is not None:
        column = non_numeric.loc[line].idxmax()
        raise DataFormatError(f"non-numeric feature {raw[column][line]!r}", path=source, line=int(line))
    line = first_flagged(~np.isfinite(numeric))
    if line is not None:
        raise DataFormatError("non-finite feature", path=source, line=int(line))

    # exact decimal parsing; the coerced frame above is only for validation
    features = np.asarray(raw.to_numpy(dtype=object), dtype=np.float64)
    y = labels.to_numpy().astype(np.int64)
    return Dataset(features=features, labels=y, num_classes=int(y.max()) + 1)


def write_csv(path: str | Path, dataset: Dataset) -> Path:
    path = Path(path)
    frame = pd.DataFrame(dataset.features)
    frame.insert(0, "label", dataset.labels)
    frame.to_csv(path, header=False, index=False, float_format="%.17g")
    return path


# ---------------------------------------------------------------------------
# Synthetic task
# ---------------------------------------------------------------------------


def generate_synthetic(
    classes: int,
    dim: int,
    per_class: int,
    separation: float,
    seed: int,
) -> Dataset:
    """Gaussian clusters with unit covariance and means on a sphere of radius *separation*."""
    if classes < 1 or dim < 1 or per_class < 1:
        raise ValueError(
            f"classes, dim and per_class must be >= 1, got {classes}, {dim}, {per_class}"
        )
    if separation < 0:
        raise ValueError(f"separation must be >= 0, got {separation!r}")
    rng = Rng(seed)
    directions = rng.normal((classes, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    means = separation * directions / np.maximum(norms, 1e-300)

    labels = np.repeat(np.arange(classes, dtype=np.int64), per_class)
    features = means[labels] + rng.normal((labels.size, dim))
    order = rng.permutation(labels.size)
    return Dataset(features=features[order], labels=labels[order], num_classes=classes)


# ---------------------------------------------------------------------------
# Splitting and batching
# ---------------------------------------------------------------------------


def split_cv(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Hold out the first ``ceil(cv_fraction * N)`` examples of a seeded shuffle."""
    n = len(dataset)
    if n < 10:
        raise PartitionError(f"need at least 10 examples to split, got {n}")
    n_cv = math.ceil(round(spec.cv_fraction * n, 9))
    order = Rng(spec.seed).permutation(n)
    return dataset.subset(order[n_cv:]), dataset.subset(order[:n_cv])


def minibatches(
    dataset: Dataset, batch_size: int, epoch_seed: int,
) -> list[tuple[Matrix, npt.NDArray[np.int64]]]:
    """Shuffle with *epoch_seed* and cut ``N // batch_size`` full batches."""
    n = len(dataset)
    if batch_size < 1:
        raise PartitionError(f"batch size must be >= 1, got {batch_size}")
    if batch_size > n:
        raise PartitionError(f"batch size {batch_size} exceeds dataset size {n}")
    order = Rng(epoch_seed).permutation(n)
    batches = []
    for start in range(0, n - batch_size + 1, batch_size):
        idx = order[start : start + batch_size]
        batches.append((dataset.features[idx], dataset.labels[idx]))
    return batches


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension affine map to zero mean and unit variance."""

    mean: npt.NDArray[np.float64]
    scale: npt.NDArray[np.float64]

    @classmethod
    def fit(cls, dataset: Dataset) -> Standardizer:
        std = dataset.features.std(axis=0)
        return cls(mean=dataset.features.mean(axis=0), scale=np.maximum(std, 1e-12))

    def apply(self, dataset: Dataset) -> Dataset:
        if dataset.dim != self.mean.size:
            raise ShapeError(
                f"dataset has {dataset.dim} features, standardizer was fit on {self.mean.size}",
                op="Standardizer.apply",
            )
        return Dataset(
            features=(dataset.features - self.mean) / self.scale,
            labels=dataset.labels,
            num_classes=dataset.num_classes,
        )


def standardize(train: Dataset, *others: Dataset) -> tuple[Dataset, ...]:
    """Standardise *train* and every dataset in *others* with statistics of *train*."""
    stats = Standardizer.fit(train)
    logger.debug("standardizing {} features from {} training examples", train.dim, len(train))
    return tuple(stats.apply(d) for d in (train, *others))
