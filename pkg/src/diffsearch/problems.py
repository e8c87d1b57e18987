"""Benchmark objectives, the knapsack penalty pipeline, and distance metrics.

The benchmark registry carries the five test functions with their boxes
and known optima. The knapsack side provides the correlated instance
generator, the smooth barrier transform onto [0,1]^N, an exact dynamic
programming oracle for verification, and the plain-text instance format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError, OracleTooLarge, UnknownProblem
from .numerics import RngStream

__all__ = [
    "Problem",
    "EvalCounter",
    "counted",
    "make_benchmark",
    "benchmark_names",
    "normalized_distance",
    "flips_from_distance",
    "round_to_binary",
    "KnapsackInstance",
    "BarrierParams",
    "knapsack_transform",
    "generate_instance",
    "choose_weight_scale",
    "solve_knapsack_exact",
    "save_instance",
    "load_instance",
]


@dataclass
class Problem:
    """Box-bounded objective with an optional known optimum.

    cost must be a pure function of its input vector: no internal state,
    same output for same input, safe to call concurrently.
    """

    name: str
    bounds: np.ndarray
    cost: Callable[[np.ndarray], float]
    known_optimum: Optional[tuple[np.ndarray, float]] = None

    def __post_init__(self) -> None:
        self.bounds = np.asarray(self.bounds, dtype=float)
        if self.bounds.ndim != 2 or self.bounds.shape[1] != 2:
            raise ValueError("bounds must have shape (N, 2)")
        if not np.all(np.isfinite(self.bounds)):
            raise ValueError("bounds must be finite")
        if not np.all(self.bounds[:, 0] < self.bounds[:, 1]):
            raise ValueError("each lower bound must be below its upper bound")

    @property
    def dimension(self) -> int:
        return self.bounds.shape[0]

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            x.shape == (self.dimension,)
            and np.all(x >= self.bounds[:, 0])
            and np.all(x <= self.bounds[:, 1])
        )


class EvalCounter:
    """Wraps a cost function and counts invocations."""

    def __init__(self, cost: Callable[[np.ndarray], float]):
        self._cost = cost
        self.count = 0

    def __call__(self, x: np.ndarray) -> float:
        self.count += 1
        return self._cost(x)


def counted(problem: Problem) -> tuple[Problem, EvalCounter]:
    """Return a copy of problem whose cost reports into an EvalCounter."""
    counter = EvalCounter(problem.cost)
    wrapped = Problem(problem.name, problem.bounds.copy(), counter, problem.known_optimum)
    return wrapped, counter


# ---------------------------------------------------------------------------
# Benchmark registry


def _schwefel() -> Problem:
    n = 6

    def cost(x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return 418.9829 * n - float(np.sum(x * np.sin(np.sqrt(np.abs(x)))))

    opt = np.full(n, 420.9687)
    return Problem("schwefel", np.tile([-500.0, 500.0], (n, 1)), cost, (opt, 0.0))


def _levy5() -> Problem:
    i = np.arange(1, 6, dtype=float)

    def cost(x: np.ndarray) -> float:
        x1, x2 = float(x[0]), float(x[1])
        a = np.sum(i * np.cos((i - 1.0) * x1 + i))
        b = np.sum(i * np.cos((i + 1.0) * x2 + i))
        return float(a * b + (x1 + 1.42513) ** 2 + (x2 + 0.80032) ** 2)

    opt = np.array([-1.3068, -1.4248])
    return Problem("levy5", np.tile([-10.0, 10.0], (2, 1)), cost, (opt, -176.1375))


def _booth() -> Problem:
    def cost(x: np.ndarray) -> float:
        x1, x2 = float(x[0]), float(x[1])
        return (x1 + 2.0 * x2 - 7.0) ** 2 + (2.0 * x1 + x2 - 5.0) ** 2

    return Problem("booth", np.tile([-10.0, 10.0], (2, 1)), cost, (np.array([1.0, 3.0]), 0.0))


def _colville(classic: bool) -> Problem:
    # Default follows the source formulation with linear first terms,
    # 100(x2 - x1)^2 and 90(x4 - x3)^2. The classic variant squares x1
    # and x3 inside those terms.
    def cost(x: np.ndarray) -> float:
        x1, x2, x3, x4 = (float(v) for v in x[:4])
        t1 = x1 * x1 if classic else x1
        t3 = x3 * x3 if classic else x3
        return (
            100.0 * (x2 - t1) ** 2
            + (1.0 - x1) ** 2
            + 90.0 * (x4 - t3) ** 2
            + (1.0 - x3) ** 2
            + 10.1 * ((x2 - 1.0) ** 2 + (x4 - 1.0) ** 2)
            + 19.8 * (x2 - 1.0) * (x4 - 1.0)
        )

    name = "colville-classic" if classic else "colville"
    return Problem(name, np.tile([-10.0, 10.0], (4, 1)), cost, (np.ones(4), 0.0))


def _rosenbrock() -> Problem:
    n = 20

    # The sum runs to N-1: an upper limit of N would reference x_{N+1}.
    def cost(x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        return float(
            np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (x[:-1] - 1.0) ** 2)
        )

    return Problem("rosenbrock", np.tile([-10.0, 10.0], (n, 1)), cost, (np.ones(n), 0.0))


_REGISTRY: dict[str, Callable[[], Problem]] = {
    "schwefel": _schwefel,
    "levy5": _levy5,
    "booth": _booth,
    "colville": lambda: _colville(classic=False),
    "colville-classic": lambda: _colville(classic=True),
    "rosenbrock": _rosenbrock,
}


def benchmark_names() -> list[str]:
    return sorted(_REGISTRY)


def make_benchmark(name: str) -> Problem:
    key = name.strip().lower()
    if key not in _REGISTRY:
        raise UnknownProblem(f"unknown problem {name!r}; available: {', '.join(benchmark_names())}")
    return _REGISTRY[key]()


# ---------------------------------------------------------------------------
# Distance metrics


def normalized_distance(x: np.ndarray, y: np.ndarray, bounds: np.ndarray) -> float:
    """Euclidean distance scaled by the box diagonal, in [0, 1] for in-box points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    if x.shape != y.shape or bounds.shape != (x.size, 2):
        raise DimensionError(
            f"shape mismatch: x {x.shape}, y {y.shape}, bounds {bounds.shape}"
        )
    diag2 = float(np.sum((bounds[:, 1] - bounds[:, 0]) ** 2))
    return math.sqrt(float(np.sum((x - y) ** 2)) / diag2)


def flips_from_distance(d: float, n: int) -> int:
    """Bit flips implied by a normalized distance on a unit-box binary problem."""
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"distance must be in [0, 1], got {d!r}")
    return int(math.floor(n * d * d + 0.5))


def round_to_binary(x: np.ndarray) -> np.ndarray:
    """Nearest-integer rounding on [0,1]^N; exact halves round up."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError("round_to_binary expects coordinates in [0, 1]")
    return (x >= 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# Knapsack


@dataclass
class KnapsackInstance:
    """0/1 knapsack data: profits q, weights w, capacity c."""

    q: np.ndarray
    w: np.ndarray
    c: float

    def __post_init__(self) -> None:
        self.q = np.asarray(self.q, dtype=float)
        self.w = np.asarray(self.w, dtype=float)
        self.c = float(self.c)
        if self.q.shape != self.w.shape or self.q.ndim != 1:
            raise DimensionError("q and w must be 1-D vectors of equal length")
        if np.any(self.q <= 0.0) or np.any(self.w <= 0.0) or self.c <= 0.0:
            raise ValueError("q, w, and c must be strictly positive")

    @property
    def n(self) -> int:
        return self.q.size


@dataclass
class BarrierParams:
    """Amplitudes and steepnesses of the two smooth penalty barriers."""

    k0: float
    k1: float
    b0: float
    b1: float
    b2: float

    def __post_init__(self) -> None:
        for label in ("k0", "k1", "b0", "b1", "b2"):
            if getattr(self, label) <= 0.0:
                raise ValueError(f"{label} must be positive")


def knapsack_transform(inst: KnapsackInstance, params: BarrierParams) -> Problem:
    """Unconstrained continuous relaxation of the knapsack problem on [0,1]^N.

    Cost is the negated profit plus a binarity barrier (sigmoid ridge that
    is lowest at the corners of the cube) and a capacity barrier (smooth
    ramp that activates as total weight passes c).
    """
    q, w, c = inst.q, inst.w, inst.c
    k0, k1, b0, b1, b2 = params.k0, params.k1, params.b0, params.b1, params.b2

    def cost(x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            binarity = np.sum(1.0 / (1.0 + np.exp(-b0 * (x - x * x))))
            s = float(np.dot(w, x)) - c
            capacity = (math.exp(min(b1 * s, 700.0)) - 1.0) / (np.exp(-b2 * s) + 1.0)
        return float(-np.dot(q, x) + k0 * binarity + k1 * capacity)

    bounds = np.tile([0.0, 1.0], (inst.n, 1))
    return Problem(f"knapsack-{inst.n}", bounds, cost)


def generate_instance(n: int, r: float, c: float, rng: RngStream) -> KnapsackInstance:
    """Correlated random instance: w uniform in [1, R], q = w + (eps-1)R/100 + R/10.

    Weights are quantized to 3 decimals so the dynamic-programming oracle
    stays exact at integer scale 10^3; the profit correlation band
    q - w in [R/10 - R/50, R/10] is unaffected.
    """
    if r <= 1.0 or c <= 0.0:
        raise ValueError("need R > 1 and c > 0")
    w = np.round(rng.uniform(1.0, r, size=n), 3)
    eps = rng.uniform(-1.0, 1.0, size=n)
    q = w + (eps - 1.0) * r / 100.0 + r / 10.0
    return KnapsackInstance(q=q, w=w, c=c)


def choose_weight_scale(w: np.ndarray, max_power: int = 6) -> int:
    """Smallest 10^k that maps every weight onto an integer within 1e-9."""
    w = np.asarray(w, dtype=float)
    for k in range(max_power + 1):
        scaled = w * 10.0**k
        if np.max(np.abs(scaled - np.round(scaled))) <= 1e-9:
            return 10**k
    raise OracleTooLarge(
        f"weights not integer-scalable within 10^{max_power}; quantize the instance first"
    )


_DP_CELL_BUDGET = 200_000_000


def solve_knapsack_exact(
    inst: KnapsackInstance, weight_scale: Optional[int] = None
) -> tuple[np.ndarray, float]:
    """Exact 0/1 knapsack by dynamic programming over integer-scaled weights.

    Returns an optimal binary vector and its profit. weight_scale defaults
    to the smallest power of ten that makes the weights integral.
    """
    scale = choose_weight_scale(inst.w) if weight_scale is None else int(weight_scale)
    w_int = np.round(inst.w * scale).astype(np.int64)
    if np.max(np.abs(w_int - inst.w * scale)) > 1e-6 * scale:
        raise ValueError(f"weights are not integral at scale {scale}")
    cap = int(math.floor(inst.c * scale + 1e-9))
    n = inst.n
    if n * (cap + 1) > _DP_CELL_BUDGET:
        raise OracleTooLarge(
            f"DP table of {n}x{cap + 1} cells exceeds the {_DP_CELL_BUDGET} cell budget"
        )

    value = np.zeros(cap + 1)
    take = np.zeros((n, cap + 1), dtype=np.int8)
    for i in range(n):
        wi = int(w_int[i])
        if wi > cap:
            continue
        cand = value[: cap + 1 - wi] + inst.q[i]
        improved = cand > value[wi:]
        value[wi:][improved] = cand[improved]
        take[i, wi:] = improved

    x = np.zeros(n, dtype=np.int64)
    cap_left = cap
    for i in range(n - 1, -1, -1):
        if take[i, cap_left]:
            x[i] = 1
            cap_left -= int(w_int[i])
    return x, float(np.dot(inst.q, x))


# ---------------------------------------------------------------------------
# Instance serialization (plain text, exact round-trip)


def save_instance(inst: KnapsackInstance, path) -> None:
    lines = [str(inst.n), repr(float(inst.c))]
    lines += [f"{float(inst.q[i])!r} {float(inst.w[i])!r}" for i in range(inst.n)]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> KnapsackInstance:
    with open(path, "r", encoding="ascii") as fh:
        raw = [line.strip() for line in fh if line.strip()]
    n = int(raw[0])
    c = float(raw[1])
    if len(raw) != 2 + n:
        raise ValueError(f"expected {n} item lines, found {len(raw) - 2}")
    pairs = [line.split() for line in raw[2:]]
    q = np.array([float(p[0]) for p in pairs])
    w = np.array([float(p[1]) for p in pairs])
    return KnapsackInstance(q=q, w=w, c=c)
