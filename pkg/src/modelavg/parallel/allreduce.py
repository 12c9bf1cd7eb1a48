from __future__ import annotations

from typing import Sequence

import numpy as np
from loguru import logger

from ..errors import AllReduceError
from ..linalg import Vector
from ..nnet import ParamVector


def tree_sum(vectors: Sequence[Vector]) -> Vector:
    """Sum *vectors* pairwise in rank order, level by level.

    Rank ``2k`` is added to rank ``2k + 1``; an odd one out is carried up
    unchanged.  The addition order depends only on the ranks.
    """
    level = list(vectors)
    while len(level) > 1:
        nxt = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def allreduce_average(contributions: Sequence[ParamVector], m: int) -> ParamVector:
    """Mean of the *m* workers' parameter vectors, identical for every receiver."""
    if m < 1 or len(contributions) != m:
        raise AllReduceError(
            f"expected {m} contributions, got {len(contributions)}",
            ranks=range(len(contributions)),
        )
    reference = contributions[0]
    mismatched = [
        rank for rank, pv in enumerate(contributions) if pv.data.shape != reference.data.shape
    ]
    if mismatched:
        raise AllReduceError(
            f"ranks {mismatched} sent vectors of shape"
            f" {[contributions[r].data.shape for r in mismatched]},"
            f" rank 0 sent {reference.data.shape}",
            ranks=[0, *mismatched],
        )

    if all(np.array_equal(pv.data, reference.data) for pv in contributions[1:]):
        return ParamVector(data=reference.data.copy(), layer_dims=reference.layer_dims)

    total = tree_sum([pv.data for pv in contributions])
    logger.trace("all-reduce over {} ranks, {} values", m, total.size)
    return ParamVector(data=total / m, layer_dims=reference.layer_dims)
