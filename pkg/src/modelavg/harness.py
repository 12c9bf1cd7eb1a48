"""Experiment execution: one run from a config, and comparison grids over a key."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import pandas as pd
from loguru import logger

from .config import InitKind, RunConfig
from .data import Dataset, SplitSpec, generate_synthetic, load_csv, split_cv, standardize
from .errors import ConfigError, ModelAvgError
from .linalg import Rng
from .metrics import MetricsRecord, Speedup, compute_speedup, write_metrics
from .nnet import MlpModel, accuracy, init_random, load_model, save_model
from .parallel import ParallelPlan, TrainOptions, serial_train, train_parallel
from .pretrain import greedy_pretrain


@dataclass
class RunResult:
    config: RunConfig
    model: MlpModel
    metrics: list[MetricsRecord]
    cv_accuracy: float
    metrics_path: Path | None = None
    checkpoint_path: Path | None = None


def prepare_data(config: RunConfig) -> tuple[Dataset, Dataset]:
    """Load or generate the examples, hold out CV, and standardise both splits."""
    if config.data_csv is not None:
        dataset = load_csv(config.data_csv)
        logger.info("loaded {} examples of dim {} from {}", len(dataset), dataset.dim, config.data_csv)
    else:
        dataset = generate_synthetic(
            config.synthetic_classes,
            config.synthetic_dim,
            config.synthetic_per_class,
            config.synthetic_separation,
            config.seed,
        )
        logger.info(
            "generated {} synthetic examples ({} classes, dim {})",
            len(dataset), dataset.num_classes, dataset.dim,
        )
    train, cv = split_cv(dataset, SplitSpec(cv_fraction=config.cv_fraction, seed=config.seed))
    train, cv = standardize(train, cv)
    return train, cv


def build_model(config: RunConfig, train: Dataset) -> MlpModel:
    dims = config.layer_dims(train.dim, train.num_classes)
    if config.init_checkpoint_path is not None:
        model = load_model(config.init_checkpoint_path)
        if model.layer_dims != dims:
            raise ConfigError(
                f"checkpoint has layer dims {list(model.layer_dims)}, config needs {list(dims)}",
                key="init_checkpoint_path",
            )
        logger.info("initial model loaded from {}", config.init_checkpoint_path)
        return model

    rng = Rng(config.seed)
    if config.init is InitKind.RANDOM:
        return init_random(dims, config.activation, rng)

    model = greedy_pretrain(
        dims,
        train.features,
        config.pretrain_epochs,
        rng,
        activation=config.activation,
        lr=config.pretrain_lr,
        gaussian_lr=config.pretrain_gaussian_lr,
        batch_size=min(config.minibatch, len(train)),
    )
    if config.pretrain_checkpoint_path is not None:
        path = save_model(config.pretrain_checkpoint_path, model)
        logger.info("pretrained stack written to {}", path)
    return model


def train_options(config: RunConfig) -> TrainOptions:
    return TrainOptions(
        epochs=config.epochs,
        optimizer=config.optimizer,
        lr_init=config.lr_init,
        lr_schedule=config.lr_schedule,
        scale_lr=config.scale_lr,
        ng_decay=config.ng_decay,
        ng_alpha=config.ng_alpha,
        ng_update_period=config.ng_update_period,
    )


def run(config: RunConfig, *, write: bool = True) -> RunResult:
    """Pretrain if asked, train serially or in parallel, then write metrics and checkpoint."""
    train, cv = prepare_data(config)
    model0 = build_model(config, train)
    options = train_options(config)

    if config.workers == 1:
        result = serial_train(
            model0, train, cv, options, minibatch_size=config.minibatch, seed=config.seed,
        )
    else:
        plan = ParallelPlan(
            workers=config.workers,
            avg_frequency=config.avg_frequency,
            minibatch_size=config.minibatch,
            base_seed=config.seed,
        )
        result = train_parallel(plan, model0, train, cv, options)

    cv_accuracy = (
        result.metrics[-1].cv_accuracy if result.metrics else accuracy(result.model, cv.features, cv.labels)
    )
    outcome = RunResult(config=config, model=result.model, metrics=result.metrics, cv_accuracy=cv_accuracy)
    if write:
        outcome.metrics_path = write_metrics(config.metrics_path, result.metrics)
        outcome.checkpoint_path = save_model(config.checkpoint_path, result.model)
        logger.info(
            "wrote {} epochs of metrics to {} and the model to {}",
            len(result.metrics), outcome.metrics_path, outcome.checkpoint_path,
        )
    return outcome


# ---------------------------------------------------------------------------
# Comparison grids
# ---------------------------------------------------------------------------

GRID_HEADER = (
    "axis", "value", "seeds", "completed", "cv_accuracy_mean", "cv_accuracy_std",
    "speedup", "scaling", "status",
)


@dataclass
class GridRow:
    axis: str
    value: str
    seeds: int
    accuracies: list[float] = field(default_factory=list)
    speedups: list[Speedup] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return len(self.accuracies)

    @property
    def cv_accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else math.nan

    @property
    def cv_accuracy_std(self) -> float:
        if len(self.accuracies) < 2:
            return 0.0 if self.accuracies else math.nan
        return float(np.std(self.accuracies, ddof=1))

    @property
    def speedup(self) -> float:
        return float(np.mean([s.speedup for s in self.speedups])) if self.speedups else math.nan

    @property
    def scaling(self) -> float:
        return float(np.mean([s.scaling for s in self.speedups])) if self.speedups else math.nan

    @property
    def status(self) -> str:
        if not self.errors:
            return "ok"
        return "failed: " + "; ".join(self.errors)


def _run_cell(config: RunConfig, with_speedup: bool) -> tuple[float, Speedup | None]:
    parallel = run(config, write=False)
    if not with_speedup or not parallel.metrics:
        return parallel.cv_accuracy, None
    if config.workers == 1:
        serial_metrics = parallel.metrics
    else:
        serial_metrics = run(config.replace("workers", 1), write=False).metrics
    return parallel.cv_accuracy, compute_speedup(serial_metrics, parallel.metrics)


def compare_grid(
    base: RunConfig,
    axis: str,
    values: Sequence[Any],
    *,
    seeds: int = 1,
    with_speedup: bool = True,
) -> list[GridRow]:
    """Run *base* once per value of *axis* and per seed.

    Seeds are ``base.seed, base.seed + 1, ...``.  A failing cell is
    recorded on its row and the remaining cells still run.
    """
    if axis.replace("-", "_") not in RunConfig.keys():
        raise ConfigError("unknown grid axis", key=axis)
    if seeds < 1:
        raise ConfigError(f"need at least one seed, got {seeds}", key="seeds")
    rows = []
    for value in values:
        row = GridRow(axis=axis, value=str(value), seeds=seeds)
        try:
            cell = base.replace(axis, value)
        except ModelAvgError as exc:
            row.errors.append(f"{type(exc).__name__}: {exc}")
            rows.append(row)
            continue
        for s in range(seeds):
            config = cell.replace("seed", cell.seed + s)
            logger.info("grid {} = {}, seed {}", axis, value, config.seed)
            try:
                acc, speedup = _run_cell(config, with_speedup)
            except (ModelAvgError, OSError) as exc:
                logger.error("grid {} = {}, seed {} failed: {}", axis, value, config.seed, exc)
                row.errors.append(f"seed {config.seed}: {type(exc).__name__}: {exc}")
                continue
            row.accuracies.append(acc)
            if speedup is not None:
                row.speedups.append(speedup)
        rows.append(row)
    return rows


def write_grid(path: str | Path, rows: Iterable[GridRow]) -> Path:
    """Summary CSV in :data:`GRID_HEADER` order; statistics with no data are left empty."""
    path = Path(path)
    frame = pd.DataFrame(
        [
            (
                row.axis, row.value, row.seeds, row.completed,
                row.cv_accuracy_mean, row.cv_accuracy_std, row.speedup, row.scaling, row.status,
            )
            for row in rows
        ],
        columns=list(GRID_HEADER),
    )
    frame.to_csv(path, index=False, na_rep="")
    return path
