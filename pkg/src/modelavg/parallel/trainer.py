"""Serial and model-averaging parallel training.

Workers run as threads and talk to the coordinator (the calling thread)
only through queues.  The coordinator waits until every rank has sent its
parameters for the current averaging event, reduces them in rank order,
and sends the same averaged vector back to all ranks.  At epoch ends it
also evaluates the averaged model on the CV set and drives the schedule.
"""

from __future__ import annotations

import copy
import queue
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from loguru import logger

from ..data import Dataset
from ..errors import AllReduceError, PartitionError, WorkerError
from ..metrics import MetricsRecord
from ..nnet import MlpModel, accuracy, unflatten
from ..optim import LrSchedule, NgState, ScheduleKind, exponential_lr, newbob_next, scale_lr_for_workers
from .allreduce import allreduce_average
from .worker import Contribution, ParallelPlan, Sync, WorkerState, partition_data, run_worker


class OptimizerKind(str, Enum):
    SGD = "sgd"
    NGSGD = "ngsgd"


@dataclass(frozen=True)
class TrainOptions:
    epochs: int = 15
    optimizer: OptimizerKind = OptimizerKind.NGSGD
    lr_init: float = 0.32
    lr_schedule: ScheduleKind = ScheduleKind.EXPONENTIAL
    scale_lr: bool = True
    ng_decay: float = 0.95
    ng_alpha: float = 4.0
    ng_update_period: int = 1

    def __post_init__(self) -> None:
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs!r}")
        object.__setattr__(self, "optimizer", OptimizerKind(self.optimizer))
        object.__setattr__(self, "lr_schedule", ScheduleKind(self.lr_schedule))

    def initial_lr(self, workers: int) -> float:
        if self.scale_lr:
            return scale_lr_for_workers(self.lr_init, workers)
        return self.lr_init

    def make_schedule(self, workers: int) -> LrSchedule:
        return LrSchedule(
            kind=self.lr_schedule,
            lr_init=self.initial_lr(workers),
            planned_epochs=max(self.epochs, 1),
        )

    def make_ng_state(self, model: MlpModel) -> NgState | None:
        if self.optimizer is not OptimizerKind.NGSGD:
            return None
        return NgState.zeros(
            model,
            decay=self.ng_decay,
            alpha=self.ng_alpha,
            update_period=self.ng_update_period,
        )


@dataclass
class TrainResult:
    model: MlpModel
    metrics: list[MetricsRecord] = field(default_factory=list)
    workers: list[WorkerState] = field(default_factory=list)


class _EpochController:
    """Authoritative schedule, CV evaluation and metrics for one run."""

    def __init__(
        self,
        options: TrainOptions,
        workers: int,
        cv: Dataset,
        model0: MlpModel,
    ) -> None:
        self.options = options
        self.workers = workers
        self.cv = cv
        self.schedule = options.make_schedule(workers)
        self.metrics: list[MetricsRecord] = []
        self.avg_events = 0
        self.epoch = 0
        self.finished = options.epochs == 0
        self._prev_acc = (
            accuracy(model0, cv.features, cv.labels)
            if self.schedule.kind is ScheduleKind.NEWBOB
            else 0.0
        )
        self._started = time.perf_counter()

    def end_epoch(self, model: MlpModel, train_ce: float) -> tuple[float | None, bool]:
        wall = time.perf_counter() - self._started
        cv_acc = accuracy(model, self.cv.features, self.cv.labels)

        next_lr: float | None = None
        stop = False
        if self.schedule.kind is ScheduleKind.NEWBOB:
            lr_used = self.schedule.lr
            next_lr, stop = newbob_next(self.schedule, self._prev_acc, cv_acc)
            self._prev_acc = cv_acc
        else:
            lr_used = exponential_lr(self.schedule, self.epoch / self.schedule.planned_epochs)

        self.epoch += 1
        record = MetricsRecord(
            epoch=self.epoch,
            lr=float(lr_used),
            train_ce=float(train_ce),
            cv_accuracy=float(cv_acc),
            wall_seconds=float(wall),
            workers=self.workers,
            avg_events=self.avg_events,
        )
        self.metrics.append(record)
        logger.info(
            "epoch {}: lr={:.5g} train_ce={:.4f} cv_accuracy={:.4f} ({:.2f}s, {} averaging events)",
            record.epoch, record.lr, record.train_ce, record.cv_accuracy,
            record.wall_seconds, record.avg_events,
        )
        if stop:
            logger.warning("newbob stopping rule fired after epoch {}", self.epoch)
        if stop or self.epoch >= self.options.epochs:
            self.finished = True
        self._started = time.perf_counter()
        return next_lr, stop


@dataclass(frozen=True)
class _Failure:
    rank: int
    error: Exception


class _Aborted(Exception):
    pass


_ABORT = object()


def _check_shards(shards: list[Dataset], plan: ParallelPlan) -> None:
    if len(shards[0]) < plan.minibatch_size:
        raise PartitionError(
            f"shards of {len(shards[0])} examples are smaller than the minibatch"
            f" size {plan.minibatch_size}"
        )


def train_parallel(
    plan: ParallelPlan,
    model0: MlpModel,
    dataset: Dataset,
    cv: Dataset,
    options: TrainOptions,
) -> TrainResult:
    """Train *plan.workers* model replicas on disjoint shards with periodic averaging."""
    if options.epochs == 0:
        return TrainResult(model=model0)
    m = plan.workers
    shards = partition_data(dataset, m, plan.base_seed)
    _check_shards(shards, plan)

    controller = _EpochController(options, m, cv, model0)
    inbox: queue.Queue = queue.Queue()
    replies: list[queue.Queue] = [queue.Queue() for _ in range(m)]
    states = [
        WorkerState(
            rank=rank,
            model=model0,
            schedule=copy.copy(controller.schedule),
            shard=shard,
            ng_state=options.make_ng_state(model0),
        )
        for rank, shard in enumerate(shards)
    ]
    logger.info(
        "training {} workers, averaging every {} minibatches of {}, {} examples per shard",
        m, plan.avg_frequency or "epoch", plan.minibatch_size, len(shards[0]),
    )

    def work(state: WorkerState) -> WorkerState:
        def exchange(msg: Contribution) -> Sync:
            inbox.put(msg)
            reply = replies[state.rank].get()
            if reply is _ABORT:
                raise _Aborted()
            return reply

        try:
            return run_worker(state, plan, options.epochs, exchange)
        except _Aborted:
            return state
        except Exception as exc:
            logger.error("worker {} failed: {}", state.rank, exc)
            inbox.put(_Failure(rank=state.rank, error=exc))
            raise

    with ThreadPoolExecutor(max_workers=m, thread_name_prefix="modelavg-worker") as pool:
        futures = [pool.submit(work, state) for state in states]
        try:
            model = _coordinate(controller, model0, m, inbox, replies)
        except BaseException:
            for reply in replies:
                reply.put(_ABORT)
            raise
        finished: list[WorkerState] = []
        for rank, future in enumerate(futures):
            try:
                finished.append(future.result())
            except Exception as exc:
                # failed after the coordinator had already finished
                raise WorkerError(rank, exc) from exc

    return TrainResult(model=model, metrics=controller.metrics, workers=finished)


def _coordinate(
    controller: _EpochController,
    model0: MlpModel,
    m: int,
    inbox: queue.Queue,
    replies: list[queue.Queue],
) -> MlpModel:
    pending: dict[int, Contribution] = {}
    model = model0
    while not controller.finished:
        msg = inbox.get()
        if isinstance(msg, _Failure):
            raise WorkerError(msg.rank, msg.error) from msg.error
        pending[msg.rank] = msg
        if len(pending) < m:
            continue

        ordered = [pending.pop(rank) for rank in range(m)]
        ends = {c.epoch_end for c in ordered}
        if len(ends) > 1:
            raise AllReduceError(
                "ranks disagree on whether this event ends an epoch",
                ranks=[c.rank for c in ordered if c.epoch_end],
            )
        averaged = allreduce_average([c.params for c in ordered], m)
        controller.avg_events += 1
        logger.debug("averaging event {} over {} workers", controller.avg_events, m)

        lr: float | None = None
        stop = False
        if ordered[0].epoch_end:
            model = unflatten(averaged, model0)
            train_ce = float(np.mean([c.epoch_ce for c in ordered]))
            lr, stop = controller.end_epoch(model, train_ce)

        sync = Sync(params=averaged, lr=lr, stop=stop)
        for reply in replies:
            reply.put(sync)
    return model


def serial_train(
    model0: MlpModel,
    dataset: Dataset,
    cv: Dataset,
    options: TrainOptions,
    *,
    minibatch_size: int,
    seed: int = 0,
) -> TrainResult:
    """Single-process baseline; the same loop as one worker that never averages."""
    if options.epochs == 0:
        return TrainResult(model=model0)
    plan = ParallelPlan(workers=1, avg_frequency=0, minibatch_size=minibatch_size, base_seed=seed)
    shards = partition_data(dataset, 1, seed)
    _check_shards(shards, plan)

    controller = _EpochController(options, 1, cv, model0)
    state = WorkerState(
        rank=0,
        model=model0,
        schedule=copy.copy(controller.schedule),
        shard=shards[0],
        ng_state=options.make_ng_state(model0),
    )

    def exchange(msg: Contribution) -> Sync:
        lr, stop = controller.end_epoch(unflatten(msg.params, model0), msg.epoch_ce)
        return Sync(params=msg.params, lr=lr, stop=stop)

    logger.info("training serially, minibatches of {}, {} examples", minibatch_size, len(shards[0]))
    try:
        run_worker(state, plan, options.epochs, exchange)
    except Exception as exc:
        raise WorkerError(0, exc) from exc
    return TrainResult(model=state.model, metrics=controller.metrics, workers=[state])
