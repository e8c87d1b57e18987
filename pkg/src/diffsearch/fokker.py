"""Stationary-density estimation by conditional-CDF collocation inside Gibbs sweeps.

For one coordinate with the others held fixed, the stationary conditional
CDF y(x_n) of the diffusive search solves the two-point boundary value
problem

    y'' + (1/D) dV/dx_n y' = 0,    y(lo) = 0,  y(hi) = 1.

The CDF is expanded in quarter-wave sines that vanish at lo and peak at
hi, the ODE is collocated at L-1 uniform interior nodes, and one boundary
row pins y(hi) = 1, giving an L x L dense system per coordinate. A Gibbs
sweep solves the system for every coordinate in turn and resamples that
coordinate from the tabulated inverse CDF. Averaging the expansion
coefficients over sweeps yields marginal density estimates, which this
module can query for pdf values, modes, moments, and highest-density
intervals. A reflected Euler-Maruyama simulator of the underlying
diffusion is included as an independent cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DiffsearchError, DomainError, InvalidDistribution
from .numerics import DenseSystem, RngStream, numerical_partial, solve_dense_linear
from .problems import Problem

__all__ = [
    "EstimatorConfig",
    "CdfExpansion",
    "SampledCdf",
    "SweepState",
    "MarginalEstimate",
    "build_conditional_cdf",
    "evaluate_cdf",
    "evaluate_pdf",
    "tabulate_and_repair",
    "sample_inverse",
    "gibbs_sweep",
    "estimate_marginals",
    "marginal_mode",
    "probability_interval",
    "analytic_moments",
    "simulate_langevin",
]


@dataclass
class EstimatorConfig:
    """Tuning knobs of the density estimator.

    L is the basis size, D the diffusion constant, M the sweep budget.
    grad_step is relative to each coordinate's range. conv_tol compares
    normalized 95%-interval lengths between successive sweeps; burn_in
    sweeps update the chain without entering the averages.
    """

    L: int
    D: float
    M: int
    table_size: int = 2048
    conv_tol: float = 0.01
    burn_in: int = 0
    grad_step: float = 1e-6

    def __post_init__(self) -> None:
        if self.L < 2:
            raise ValueError("L must be at least 2")
        if self.D <= 0.0:
            raise ValueError("D must be positive")
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.table_size < 64:
            raise ValueError("table_size must be at least 64")
        if self.conv_tol <= 0.0:
            raise ValueError("conv_tol must be positive")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if self.grad_step <= 0.0:
            raise ValueError("grad_step must be positive")


@dataclass
class CdfExpansion:
    """Sine-basis conditional CDF for one coordinate on [lo, hi]."""

    coeffs: np.ndarray
    lo: float
    hi: float

    def __post_init__(self) -> None:
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 1 or self.coeffs.size < 1:
            raise ValueError("coeffs must be a non-empty vector")
        if not self.hi > self.lo:
            raise ValueError("need hi > lo")

    @property
    def omegas(self) -> np.ndarray:
        l = np.arange(1, self.coeffs.size + 1, dtype=float)
        return (2.0 * l - 1.0) * math.pi / (2.0 * (self.hi - self.lo))


@dataclass
class SampledCdf:
    """Monotone CDF lookup table on an equally spaced grid."""

    grid: np.ndarray
    values: np.ndarray
    repair_applied: bool
    repair_amplitude: float = 0.0

    @property
    def lo(self) -> float:
        return float(self.grid[0])

    @property
    def hi(self) -> float:
        return float(self.grid[-1])


@dataclass
class SweepState:
    """Current point of one Gibbs chain plus its owned RNG."""

    point: np.ndarray
    rng: RngStream
    sweep_index: int = 0

    def __post_init__(self) -> None:
        self.point = np.asarray(self.point, dtype=float)


@dataclass
class MarginalEstimate:
    """Running average of per-coordinate CDF coefficients over sweeps."""

    bounds: np.ndarray
    mean_coeffs: np.ndarray
    n_samples: int = 0
    last_intervals: Optional[np.ndarray] = None
    stop_reason: str = ""
    sweeps_run: int = 0
    conditionals_built: int = 0
    repair_count: int = 0
    repair_strong_count: int = 0
    table_size: int = 2048
    history: Optional[list] = None

    @classmethod
    def empty(cls, bounds: np.ndarray, L: int, table_size: int, record_history: bool = False):
        bounds = np.asarray(bounds, dtype=float)
        return cls(
            bounds=bounds,
            mean_coeffs=np.zeros((bounds.shape[0], L)),
            table_size=table_size,
            history=[] if record_history else None,
        )

    @property
    def dimension(self) -> int:
        return self.bounds.shape[0]

    def expansion(self, n: int) -> CdfExpansion:
        return CdfExpansion(
            self.mean_coeffs[n].copy(), float(self.bounds[n, 0]), float(self.bounds[n, 1])
        )

    def accumulate(self, sweep_coeffs: np.ndarray) -> None:
        """Fold one sweep's (N, L) coefficient block into the running mean."""
        self.n_samples += 1
        self.mean_coeffs += (sweep_coeffs - self.mean_coeffs) / self.n_samples
        if self.history is not None:
            self.history.append(sweep_coeffs.copy())


# ---------------------------------------------------------------------------
# Per-coordinate solver


def build_conditional_cdf(
    problem: Problem, state: SweepState, n: int, config: EstimatorConfig
) -> CdfExpansion:
    """Solve the conditional-CDF boundary value problem for coordinate n.

    Collocates y'' + (V'/D) y' = 0 at L-1 uniform interior nodes with the
    drift V' taken by central differences at the current point of the
    chain, and closes the system with the boundary row y(hi) = 1. Consumes
    exactly 2(L-1) cost evaluations.
    """
    lo, hi = (float(b) for b in problem.bounds[n])
    span = hi - lo
    L = config.L
    exp = CdfExpansion(np.zeros(L), lo, hi)
    omega = exp.omegas

    nodes = lo + span * np.arange(1, L) / L
    h = config.grad_step * span
    drift = np.empty(L - 1)
    x = state.point.copy()
    for i, xi in enumerate(nodes):
        x[n] = xi
        drift[i] = numerical_partial(problem, x, n, h)

    u = nodes - lo
    phase = np.outer(u, omega)
    sin_block = np.sin(phase)
    cos_block = np.cos(phase)
    matrix = np.empty((L, L))
    matrix[: L - 1] = -sin_block * omega**2 + (drift / config.D)[:, None] * cos_block * omega
    matrix[L - 1] = np.sin(omega * span)
    rhs = np.zeros(L)
    rhs[L - 1] = 1.0

    exp.coeffs = solve_dense_linear(DenseSystem(matrix, rhs))
    return exp


def _check_domain(exp: CdfExpansion, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(arr < exp.lo) or np.any(arr > exp.hi):
        raise DomainError(f"x outside [{exp.lo}, {exp.hi}]")
    return arr


def evaluate_cdf(exp: CdfExpansion, x):
    """Exact finite-sum evaluation of the expansion at x (scalar or array)."""
    arr = _check_domain(exp, x)
    phase = np.multiply.outer(arr - exp.lo, exp.omegas)
    out = np.sin(phase) @ exp.coeffs
    return float(out) if np.isscalar(x) else out


def evaluate_pdf(exp: CdfExpansion, x):
    """Term-wise analytic derivative of the expansion at x (scalar or array)."""
    arr = _check_domain(exp, x)
    phase = np.multiply.outer(arr - exp.lo, exp.omegas)
    out = np.cos(phase) @ (exp.coeffs * exp.omegas)
    return float(out) if np.isscalar(x) else out


def tabulate_and_repair(exp: CdfExpansion, table_size: int) -> SampledCdf:
    """Sample the expansion on a grid and force it into a valid CDF.

    Running-maximum repair removes decreasing stretches, values are
    clamped to [0, 1], and the table is rescaled to end exactly at 0 and
    1. repair_applied reports whether any correction exceeded 1e-9.
    """
    grid = np.linspace(exp.lo, exp.hi, table_size)
    raw = evaluate_cdf(exp, grid)
    repaired = np.clip(np.maximum.accumulate(raw), 0.0, 1.0)
    amplitude = float(np.max(np.abs(repaired - raw)))
    base, top = repaired[0], repaired[-1]
    if not top > base:
        raise InvalidDistribution(
            f"flat CDF table (top {top!r} <= base {base!r}); expansion carries no mass"
        )
    values = (repaired - base) / (top - base)
    values[0], values[-1] = 0.0, 1.0
    return SampledCdf(grid, values, repair_applied=amplitude > 1e-9, repair_amplitude=amplitude)


def sample_inverse(cdf: SampledCdf, rng: RngStream) -> float:
    """Draw one variate by linear interpolation of the inverse table."""
    u = float(rng.uniform())
    return float(np.interp(u, cdf.values, cdf.grid))


# ---------------------------------------------------------------------------
# Sweep engine


def gibbs_sweep(
    problem: Problem,
    state: SweepState,
    config: EstimatorConfig,
    acc: Optional[MarginalEstimate] = None,
) -> np.ndarray:
    """One full coordinate sweep; returns the (N, L) coefficient block.

    Coordinates are visited in ascending order. Each visit solves the
    conditional CDF at the chain's current point, resamples x_n from the
    repaired table, and (when acc is given) folds the coefficients into
    the running marginal averages.
    """
    n_dim = problem.dimension
    block = np.empty((n_dim, config.L))
    for n in range(n_dim):
        try:
            exp = build_conditional_cdf(problem, state, n, config)
            table = tabulate_and_repair(exp, config.table_size)
            state.point[n] = sample_inverse(table, state.rng)
        except DiffsearchError as err:
            raise type(err)(f"coordinate {n}: {err}") from err
        block[n] = exp.coeffs
        if acc is not None:
            acc.conditionals_built += 1
            if table.repair_applied:
                acc.repair_count += 1
            if table.repair_amplitude > 1e-3:
                acc.repair_strong_count += 1
    state.sweep_index += 1
    if acc is not None:
        acc.accumulate(block)
        acc.sweeps_run = state.sweep_index
    return block


def _normalized_interval_lengths(est: MarginalEstimate, mass: float = 0.95) -> np.ndarray:
    lengths = np.empty(est.dimension)
    for n in range(est.dimension):
        lo_x, hi_x = probability_interval(est, n, mass)
        span = est.bounds[n, 1] - est.bounds[n, 0]
        lengths[n] = (hi_x - lo_x) / span
    return lengths


def estimate_marginals(
    problem: Problem,
    config: EstimatorConfig,
    rng: RngStream,
    record_history: bool = False,
) -> MarginalEstimate:
    """Run Gibbs sweeps until the sweep budget or interval convergence.

    The chain starts uniformly at random in the box. After each averaged
    sweep the normalized 95% interval of every coordinate is compared
    with the previous sweep's value; when every coordinate moves less
    than conv_tol the run stops early.
    """
    bounds = problem.bounds
    point = rng.uniform(bounds[:, 0], bounds[:, 1])
    state = SweepState(point=point, rng=rng)
    acc = MarginalEstimate.empty(bounds, config.L, config.table_size, record_history)

    prev: Optional[np.ndarray] = None
    for sweep in range(1, config.M + 1):
        if sweep <= config.burn_in:
            gibbs_sweep(problem, state, config, acc=None)
            continue
        gibbs_sweep(problem, state, config, acc)
        lengths = _normalized_interval_lengths(acc)
        acc.last_intervals = lengths
        if prev is not None and np.max(np.abs(lengths - prev)) < config.conv_tol:
            acc.stop_reason = "converged"
            break
        prev = lengths
    else:
        acc.stop_reason = "max_sweeps"

    if acc.conditionals_built and acc.repair_strong_count > 0.2 * acc.conditionals_built:
        warnings.warn(
            f"{acc.repair_strong_count}/{acc.conditionals_built} conditionals needed "
            "monotonicity repair above 1e-3; consider a larger D or a larger L",
            stacklevel=2,
        )
    return acc


# ---------------------------------------------------------------------------
# Density queries


def marginal_mode(est: MarginalEstimate, n: int) -> float:
    """Argmax of the averaged pdf on the table grid, parabolically refined.

    Grid ties break toward the lower index, so a flat density reports the
    lower bound.
    """
    exp = est.expansion(n)
    grid = np.linspace(exp.lo, exp.hi, est.table_size)
    pdf = evaluate_pdf(exp, grid)
    i = int(np.argmax(pdf))
    if i == 0 or i == grid.size - 1:
        return float(grid[i])
    y0, y1, y2 = pdf[i - 1], pdf[i], pdf[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0.0:
        return float(grid[i])
    shift = 0.5 * (y0 - y2) / denom
    step = grid[1] - grid[0]
    return float(grid[i] + np.clip(shift, -1.0, 1.0) * step)


def probability_interval(est: MarginalEstimate, n: int, mass: float) -> tuple[float, float]:
    """Greedy highest-density interval around the mode's grid cell.

    Grows the interval one cell at a time, always taking the neighbor
    with more probability mass (ties go left), until the accumulated CDF
    mass reaches the target.
    """
    if not 0.0 < mass < 1.0:
        raise ValueError("mass must lie strictly between 0 and 1")
    exp = est.expansion(n)
    table = tabulate_and_repair(exp, est.table_size)
    cell_mass = np.diff(table.values)
    n_cells = cell_mass.size

    mode = marginal_mode(est, n)
    step = table.grid[1] - table.grid[0]
    k = int(np.clip((mode - table.lo) / step, 0, n_cells - 1))
    if k > 0 and cell_mass[k - 1] > cell_mass[k]:
        k = k - 1

    left, right = k, k + 1
    acc = float(cell_mass[k])
    while acc < mass and (left > 0 or right < n_cells):
        take_left = False
        if left > 0 and right < n_cells:
            take_left = cell_mass[left - 1] >= cell_mass[right]
        elif left > 0:
            take_left = True
        if take_left:
            left -= 1
            acc += float(cell_mass[left])
        else:
            acc += float(cell_mass[right])
            right += 1
    return float(table.grid[left]), float(table.grid[right])


def analytic_moments(est: MarginalEstimate, n: int) -> tuple[float, float]:
    """Mean and sigma of the averaged density from closed-form integrals.

    Both moments reduce, by integration by parts, to finite sums over the
    basis antiderivatives; the density is renormalized by y(hi) first.
    """
    exp = est.expansion(n)
    return _expansion_moments(exp)


def _expansion_moments(exp: CdfExpansion) -> tuple[float, float]:
    a = exp.coeffs
    w = exp.omegas
    lo, hi = exp.lo, exp.hi
    span = hi - lo
    sin_w, cos_w = np.sin(w * span), np.cos(w * span)

    total = float(a @ sin_w)
    if total == 0.0:
        raise InvalidDistribution("expansion carries no mass at hi")
    # int_lo^hi y dx and int_lo^hi x y dx, term by term
    int_y = float(a @ ((1.0 - cos_w) / w))
    int_xy = float(a @ (lo * (1.0 - cos_w) / w + (sin_w / w - span * cos_w) / w))
    mean = (hi * total - int_y) / total
    second = (hi * hi * total - 2.0 * int_xy) / total
    var = second - mean * mean
    return mean, math.sqrt(max(var, 0.0))


# ---------------------------------------------------------------------------
# Langevin cross-check


def _reflect(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = hi - lo
    for _ in range(16):
        below, above = x < lo, x > hi
        if not (below.any() or above.any()):
            return x
        x = np.where(below, 2.0 * lo - x, x)
        x = np.where(above, 2.0 * hi - x, x)
    return np.clip(x, lo, hi)


def simulate_langevin(
    problem: Problem,
    D: float,
    steps: int,
    dt: float,
    rng: RngStream,
    burn_in: int = 0,
    grad_step: float = 1e-6,
) -> np.ndarray:
    """Reflected Euler-Maruyama sampler of the diffusion dx = -grad V dt + noise.

    Noise standard deviation is sqrt(2 D dt) per step and box walls
    reflect. Returns the post-burn-in trajectory, one row per step, for
    histogram comparison against the collocation densities.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not 0 <= burn_in < steps:
        raise ValueError("need 0 <= burn_in < steps")
    lo = problem.bounds[:, 0].copy()
    hi = problem.bounds[:, 1].copy()
    n_dim = problem.dimension
    h = grad_step * (hi - lo)
    sigma = math.sqrt(2.0 * D * dt)

    x = rng.uniform(lo, hi)
    out = np.empty((steps - burn_in, n_dim))
    grad = np.empty(n_dim)
    for step in range(steps):
        for k in range(n_dim):
            grad[k] = numerical_partial(problem, x, k, h[k])
        x = x - grad * dt + sigma * rng.normal(n_dim)
        x = _reflect(x, lo, hi)
        if step >= burn_in:
            out[step - burn_in] = x
    return out
