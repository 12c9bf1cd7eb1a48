from .allreduce import allreduce_average, tree_sum
from .trainer import OptimizerKind, TrainOptions, TrainResult, serial_train, train_parallel
from .worker import (
    Contribution,
    ParallelPlan,
    Sync,
    WorkerState,
    partition_data,
    run_worker,
    worker_epoch_seeds,
)

__all__ = [
    "allreduce_average",
    "tree_sum",
    "ParallelPlan",
    "WorkerState",
    "Contribution",
    "Sync",
    "partition_data",
    "worker_epoch_seeds",
    "run_worker",
    "OptimizerKind",
    "TrainOptions",
    "TrainResult",
    "train_parallel",
    "serial_train",
]
