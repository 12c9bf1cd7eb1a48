"""Dense float64 arithmetic and seeded random streams.

Matrices are 2-D ``numpy.float64`` arrays in C (row-major) order; vectors
are 1-D arrays.  Random streams use numpy's ``PCG64`` bit generator, whose
output is bit-identical for a given seed on every platform.
"""

from __future__ import annotations

import numpy as np
import numpy.typing as npt
from scipy.linalg import cho_solve
from scipy.linalg.lapack import dpotrf

from .errors import NotPositiveDefiniteError, ShapeError

Matrix = npt.NDArray[np.float64]
Vector = npt.NDArray[np.float64]

_SEED_MASK = (1 << 64) - 1
_SYMMETRY_TOL = 1e-10


def as_matrix(values: npt.ArrayLike) -> Matrix:
    """Return *values* as a contiguous 2-D float64 array (copying if needed)."""
    m = np.ascontiguousarray(values, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D array, got shape {m.shape}", op="as_matrix", shapes=[m.shape])
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.shape} by {b.shape}",
            op="matmul",
            shapes=[a.shape, b.shape],
        )
    return a @ b


def frobenius_norm(m: npt.ArrayLike) -> float:
    return float(np.linalg.norm(np.ravel(m)))


def cholesky_solve(s: Matrix, rhs: npt.ArrayLike) -> Matrix:
    """Solve ``s @ x = rhs`` for symmetric positive definite *s*.

    *rhs* may be a matrix or a vector; the result has the same shape.
    Raises :class:`NotPositiveDefiniteError` naming the 0-based pivot at
    which the factorisation broke down.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ShapeError(f"matrix {s.shape} is not square", op="cholesky_solve", shapes=[s.shape])
    if rhs.shape[0] != s.shape[0]:
        raise ShapeError(
            f"cannot solve {s.shape} against {rhs.shape}",
            op="cholesky_solve",
            shapes=[s.shape, rhs.shape],
        )
    scale = max(1.0, float(np.max(np.abs(s)))) if s.size else 1.0
    if not np.allclose(s, s.T, rtol=0.0, atol=_SYMMETRY_TOL * scale):
        raise ShapeError("matrix is not symmetric", op="cholesky_solve", shapes=[s.shape])

    factor, info = dpotrf(s, lower=False, clean=True)
    if info > 0:
        raise NotPositiveDefiniteError(pivot=info - 1)
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    return cho_solve((factor, False), rhs)


class Rng:
    """Seeded PCG64 random stream.

    Two instances built from the same seed produce identical draws.
    Negative or oversized seeds are reduced modulo 2**64.
    """

    __slots__ = ("seed", "_gen")

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & _SEED_MASK
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def gaussian(self, n: int, mean: float = 0.0, stddev: float = 1.0) -> Vector:
        if stddev < 0:
            raise ValueError(f"stddev must be >= 0, got {stddev!r}")
        return self._gen.normal(mean, stddev, size=n)

    def normal(self, shape: tuple[int, ...], stddev: float = 1.0) -> npt.NDArray[np.float64]:
        return self._gen.normal(0.0, stddev, size=shape)

    def uniform(self, low: float, high: float, shape: tuple[int, ...]) -> npt.NDArray[np.float64]:
        return self._gen.uniform(low, high, size=shape)

    def bernoulli(self, probs: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        """Sample 0/1 values with the given per-entry probabilities."""
        return (self._gen.random(probs.shape) < probs).astype(np.float64)

    def permutation(self, n: int) -> npt.NDArray[np.int64]:
        return self._gen.permutation(n)

    def next_seed(self) -> int:
        """Draw a fresh 63-bit seed for a derived stream."""
        return int(self._gen.integers(0, 1 << 63))


def rng_gaussian(rng: Rng, n: int, mean: float, stddev: float) -> Vector:
    return rng.gaussian(n, mean, stddev)
