from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class ScheduleKind(str, Enum):
    NEWBOB = "newbob"
    EXPONENTIAL = "exponential"


@dataclass
class LrSchedule:
    """Learning-rate schedule state.

    ``lr`` is the current rate.  Newbob mutates it (and ``halving_active``)
    once per epoch through :func:`newbob_next`; the exponential schedule is
    a pure function of training progress, see :func:`exponential_lr`.
    """

    kind: ScheduleKind
    lr_init: float
    halve_threshold: float = 0.005
    stop_threshold: float = 0.001
    halving_active: bool = False
    final_ratio: float = 0.01
    planned_epochs: int = 15
    lr: float = field(init=False)

    def __post_init__(self) -> None:
        self.kind = ScheduleKind(self.kind)
        if self.lr_init <= 0:
            raise ValueError(f"lr_init must be > 0, got {self.lr_init!r}")
        if not 0.0 < self.final_ratio <= 1.0:
            raise ValueError(f"final_ratio must be in (0, 1], got {self.final_ratio!r}")
        if self.planned_epochs < 1:
            raise ValueError(f"planned_epochs must be >= 1, got {self.planned_epochs!r}")
        self.lr = self.lr_init

    def lr_at(self, progress: float) -> float:
        """Rate for a minibatch at *progress* (fraction of planned training done)."""
        if self.kind is ScheduleKind.EXPONENTIAL:
            return exponential_lr(self, min(progress, 1.0))
        return self.lr


def newbob_next(sched: LrSchedule, prev_cv_acc: float, cv_acc: float) -> tuple[float, bool]:
    """Advance Newbob by one epoch given the last two CV accuracies.

    The stop test uses the halving state from earlier epochs: training
    stops when halving was already active and accuracy improved by less
    than ``stop_threshold``.  Otherwise, an improvement below
    ``halve_threshold`` switches halving on, and while halving is on the
    rate halves every epoch.
    """
    improvement = cv_acc - prev_cv_acc
    if sched.halving_active and improvement < sched.stop_threshold:
        return sched.lr, True
    if improvement < sched.halve_threshold:
        sched.halving_active = True
    if sched.halving_active:
        sched.lr *= 0.5
    return sched.lr, False


def exponential_lr(sched: LrSchedule, progress: float) -> float:
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must be in [0, 1], got {progress!r}")
    return sched.lr_init * sched.final_ratio**progress


def scale_lr_for_workers(lr_init: float, workers: int) -> float:
    """Grow the initial rate with the worker count.

    Each of *m* workers sees ``1/m`` of the data, so the averaged model
    would otherwise move ``m`` times less per epoch.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers!r}")
    return lr_init * workers
