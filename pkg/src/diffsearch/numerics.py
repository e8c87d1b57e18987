"""Dense linear solves, numerical differentiation, and seeded RNG streams.

Everything downstream funnels its linear algebra and randomness through
this module so that reproducibility and error handling live in one place.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .errors import NonFiniteCost, SingularSystem

__all__ = [
    "DenseSystem",
    "RngStream",
    "solve_dense_linear",
    "numerical_partial",
]


@dataclass
class DenseSystem:
    """A square linear system A x = b."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"matrix must be square, got shape {self.matrix.shape}")
        if self.rhs.shape != (self.matrix.shape[0],):
            raise ValueError(
                f"rhs length {self.rhs.shape} does not match matrix dimension {self.matrix.shape[0]}"
            )


def solve_dense_linear(system: DenseSystem) -> np.ndarray:
    """Solve A x = b by LU decomposition with partial pivoting.

    Raises SingularSystem when any pivot falls below 1e-12 times the
    largest matrix entry, which is the working-precision rank test for
    the small dense systems assembled here.
    """
    a, b = system.matrix, system.rhs
    if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)):
        raise ValueError("system contains non-finite entries")
    scale = np.max(np.abs(a))
    if scale == 0.0:
        raise SingularSystem("zero matrix")
    with warnings.catch_warnings():
        # exact-zero pivots are reported through SingularSystem below
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(a, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if np.min(pivots) < 1e-12 * scale:
        raise SingularSystem(
            f"pivot ratio {np.min(pivots) / scale:.3e} below singularity threshold"
        )
    return lu_solve((lu, piv), b, check_finite=False)


@dataclass
class RngStream:
    """Seeded random stream addressed by (seed, stream_id).

    Uses numpy's PCG64 generator keyed through SeedSequence with the pair
    (seed, stream_id) as entropy, so equal pairs replay the exact deviate
    sequence and distinct stream ids give statistically independent
    streams. A stream is single-owner: never share one between concurrent
    consumers.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._gen = np.random.default_rng([int(self.seed), int(self.stream_id)])

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def child(self, stream_id: int) -> "RngStream":
        """Derive a sibling stream under the same top-level seed."""
        return RngStream(self.seed, stream_id)


def numerical_partial(problem, point: np.ndarray, n: int, h: float) -> float:
    """Central-difference partial derivative of problem.cost along coordinate n.

    Costs exactly two objective evaluations. Falls back to a one-sided
    difference when the stencil would leave the box.
    """
    if h <= 0.0:
        raise ValueError("step h must be positive")
    lo, hi = problem.bounds[n]
    x = np.asarray(point, dtype=float)
    xn = x[n]
    if xn + h <= hi and xn - h >= lo:
        left, right = xn - h, xn + h
    elif xn + h > hi:
        left, right = xn - h, xn
    else:
        left, right = xn, xn + h
    xp = x.copy()
    xp[n] = right
    f_right = problem.cost(xp)
    xp[n] = left
    f_left = problem.cost(xp)
    if not (np.isfinite(f_right) and np.isfinite(f_left)):
        raise NonFiniteCost(
            f"cost non-finite near coordinate {n} at x_n={xn!r} (h={h!r})"
        )
    return (f_right - f_left) / (right - left)
