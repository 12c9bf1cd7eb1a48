"""Per-worker training loop and the messages workers exchange.

A worker owns its model, optimizer state and data shard.  It runs local
minibatch updates and, every ``avg_frequency`` updates and at the end of
each epoch, hands its parameters to an *exchange* callable that blocks
until the averaged parameters come back.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import numpy.typing as npt
from loguru import logger

from ..data import Dataset, minibatches
from ..errors import PartitionError
from ..linalg import Matrix, Rng
from ..nnet import MlpModel, ParamVector, backward, cross_entropy, flatten, forward, unflatten
from ..optim import LrSchedule, NgState, ng_precondition, ng_update_state, sgd_step


@dataclass(frozen=True)
class ParallelPlan:
    """Worker count, averaging frequency, minibatch size and seed of a run.

    ``avg_frequency`` is the number of local minibatch updates between
    averaging events; 0 averages only at epoch boundaries.
    """

    workers: int
    avg_frequency: int
    minibatch_size: int
    base_seed: int = 0

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers!r}")
        if self.avg_frequency < 0:
            raise ValueError(f"avg_frequency must be >= 0, got {self.avg_frequency!r}")
        if self.minibatch_size < 1:
            raise ValueError(f"minibatch_size must be >= 1, got {self.minibatch_size!r}")


@dataclass(frozen=True)
class Contribution:
    rank: int
    params: ParamVector
    epoch_end: bool = False
    epoch_ce: float | None = None


@dataclass(frozen=True)
class Sync:
    """Reply to a contribution; ``lr`` and ``stop`` are only set at epoch ends."""

    params: ParamVector
    lr: float | None = None
    stop: bool = False


Exchange = Callable[[Contribution], Sync]


@dataclass
class WorkerState:
    rank: int
    model: MlpModel
    schedule: LrSchedule
    shard: Dataset
    ng_state: NgState | None = None
    local_update_count: int = 0

    def step(self, features: Matrix, labels: npt.NDArray[np.int64], lr: float) -> float:
        """One local update; returns the minibatch cross-entropy before the update."""
        trace = forward(self.model, features)
        loss = cross_entropy(trace, labels)
        grads = backward(self.model, trace, labels)
        if self.ng_state is not None:
            self.ng_state = ng_update_state(self.ng_state, trace, grads)
            grads = ng_precondition(self.ng_state, grads)
        self.model = sgd_step(self.model, grads, lr)
        self.local_update_count += 1
        return loss

    def adopt(self, params: ParamVector) -> None:
        self.model = unflatten(params, self.model)


def partition_data(dataset: Dataset, m: int, seed: int) -> list[Dataset]:
    """Shuffle once with *seed*, then cut *m* contiguous shards of ``N // m`` examples."""
    n = len(dataset)
    if m < 1:
        raise PartitionError(f"need at least one shard, got {m}")
    if m > n:
        raise PartitionError(f"cannot split {n} examples into {m} shards")
    size = n // m
    dropped = n - size * m
    if dropped:
        logger.warning("partition drops {} of {} examples to balance {} shards", dropped, n, m)
    order = Rng(seed).permutation(n)
    return [dataset.subset(order[r * size : (r + 1) * size]) for r in range(m)]


def worker_epoch_seeds(base_seed: int, rank: int, epochs: int) -> list[int]:
    """Per-epoch shuffle seeds drawn from the stream seeded ``base_seed + rank``."""
    rng = Rng(base_seed + rank)
    return [rng.next_seed() for _ in range(epochs)]


def run_worker(state: WorkerState, plan: ParallelPlan, epochs: int, exchange: Exchange) -> WorkerState:
    seeds = worker_epoch_seeds(plan.base_seed, state.rank, epochs)
    planned = state.schedule.planned_epochs
    for epoch in range(epochs):
        batches = minibatches(state.shard, plan.minibatch_size, seeds[epoch])
        k = len(batches)
        total_ce = 0.0
        since_sync = 0
        for i, (features, labels) in enumerate(batches):
            lr = state.schedule.lr_at((epoch + i / k) / planned)
            total_ce += state.step(features, labels, lr)
            since_sync += 1
            if i < k - 1 and plan.avg_frequency and since_sync == plan.avg_frequency:
                state.adopt(exchange(Contribution(rank=state.rank, params=flatten(state.model))).params)
                since_sync = 0

        sync = exchange(
            Contribution(
                rank=state.rank,
                params=flatten(state.model),
                epoch_end=True,
                epoch_ce=total_ce / k,
            )
        )
        state.adopt(sync.params)
        if sync.lr is not None:
            state.schedule.lr = sync.lr
        if sync.stop:
            logger.debug("worker {} stopping after epoch {}", state.rank, epoch + 1)
            break
    return state
