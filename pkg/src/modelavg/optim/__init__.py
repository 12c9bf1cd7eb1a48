from .natural_gradient import (
    NgState,
    apply_kronecker_inverse,
    ng_precondition,
    ng_update_state,
    smoothed_factor,
)
from .schedules import (
    LrSchedule,
    ScheduleKind,
    exponential_lr,
    newbob_next,
    scale_lr_for_workers,
)
from .sgd import sgd_step

__all__ = [
    "sgd_step",
    "NgState",
    "ng_update_state",
    "ng_precondition",
    "smoothed_factor",
    "apply_kronecker_inverse",
    "LrSchedule",
    "ScheduleKind",
    "newbob_next",
    "exponential_lr",
    "scale_lr_for_workers",
]
