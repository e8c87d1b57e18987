"""Greedy density-guided search: Gibbs estimation sweeps + downhill simplex.

Each outer iteration refreshes the marginal density estimate with one
sweep, seeds a simplex population from the current best point, the
density mode, and uniform draws at the estimated fluctuation scales,
then refines locally with Nelder-Mead. An ablation mode replaces the
learned density with a flat one to quantify the value of the guidance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fokker import (
    EstimatorConfig,
    MarginalEstimate,
    SweepState,
    analytic_moments,
    gibbs_sweep,
    marginal_mode,
)
from .numerics import RngStream
from .problems import Problem, counted

__all__ = [
    "SimplexConfig",
    "HybridReport",
    "nelder_mead",
    "build_population",
    "greedy_search",
]


@dataclass
class SimplexConfig:
    """Stopping rules of the downhill simplex: fractional spread and eval cap."""

    ftol: float = 1e-4
    max_evals: int = 50_000

    def __post_init__(self) -> None:
        if self.ftol <= 0.0:
            raise ValueError("ftol must be positive")
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")


@dataclass
class HybridReport:
    """Outcome of one greedy run: best point, trace, and success flag."""

    best_point: np.ndarray
    best_value: float
    trace: list[tuple[int, float, int]]
    success: Optional[bool]
    evals_total: int
    iterations_run: int


def _fractional_spread(f_best: float, f_worst: float) -> float:
    return 2.0 * abs(f_worst - f_best) / (abs(f_worst) + abs(f_best) + 1e-30)


def _fix_degeneracy(verts: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Perturb affinely dependent simplexes by 1e-8 of the coordinate range."""
    ndim = verts.shape[1]
    span = bounds[:, 1] - bounds[:, 0]
    for _ in range(3):
        if np.linalg.matrix_rank(verts[1:] - verts[0]) == ndim:
            return verts
        bump = 1e-8 * span * np.eye(ndim)
        verts = verts.copy()
        verts[1:] = np.clip(verts[1:] + bump, bounds[:, 0], bounds[:, 1])
        # flip direction for vertices stuck on the upper face
        at_wall = verts[1:] == bounds[:, 1]
        verts[1:] = np.where(at_wall, verts[1:] - 2e-8 * span, verts[1:])
    return verts


def nelder_mead(
    problem: Problem, simplex: np.ndarray, cfg: SimplexConfig
) -> tuple[np.ndarray, float, int]:
    """Downhill simplex with reflection 1, expansion 2, contraction 0.5, shrink 0.5.

    Stops when the fractional spread between worst and best vertex drops
    below ftol or when max_evals cost evaluations are consumed. Candidate
    points are clipped to the box before evaluation, so the returned
    point always lies inside it.
    """
    lo, hi = problem.bounds[:, 0], problem.bounds[:, 1]
    verts = np.clip(np.asarray(simplex, dtype=float).copy(), lo, hi)
    npts, ndim = verts.shape
    if npts != ndim + 1 or ndim != problem.dimension:
        raise ValueError(f"simplex must be (N+1, N) for N={problem.dimension}")
    if cfg.max_evals < npts:
        raise ValueError("max_evals must be at least N+1")
    verts = _fix_degeneracy(verts, problem.bounds)

    evals = 0

    def call(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return problem.cost(x)

    f = np.array([call(v) for v in verts])
    while True:
        order = np.argsort(f, kind="stable")
        verts, f = verts[order], f[order]
        if _fractional_spread(f[0], f[-1]) < cfg.ftol or evals >= cfg.max_evals:
            break

        centroid = verts[:-1].mean(axis=0)
        xr = np.clip(centroid + (centroid - verts[-1]), lo, hi)
        fr = call(xr)
        if fr < f[0] and evals < cfg.max_evals:
            xe = np.clip(centroid + 2.0 * (centroid - verts[-1]), lo, hi)
            fe = call(xe)
            if fe < fr:
                verts[-1], f[-1] = xe, fe
            else:
                verts[-1], f[-1] = xr, fr
        elif fr < f[-2]:
            verts[-1], f[-1] = xr, fr
        elif evals < cfg.max_evals:
            if fr < f[-1]:
                xc = np.clip(centroid + 0.5 * (xr - centroid), lo, hi)
            else:
                xc = np.clip(centroid + 0.5 * (verts[-1] - centroid), lo, hi)
            fc = call(xc)
            if fc < min(fr, f[-1]):
                verts[-1], f[-1] = xc, fc
            else:
                for i in range(1, npts):
                    if evals >= cfg.max_evals:
                        break
                    verts[i] = np.clip(verts[0] + 0.5 * (verts[i] - verts[0]), lo, hi)
                    f[i] = call(verts[i])
        else:
            break

    best = int(np.argmin(f))
    return verts[best].copy(), float(f[best]), evals


def build_population(
    best: np.ndarray,
    mode_point: np.ndarray,
    sigmas: np.ndarray,
    rng: RngStream,
    bounds: np.ndarray,
    construction: str = "sample",
) -> np.ndarray:
    """N+1 simplex vertices: best, the density mode, and N-1 scaled draws.

    The default construction samples each remaining vertex coordinate-wise
    uniform in [best - sigma/2, best + sigma/2], so the distribution length
    per dimension equals the fluctuation size. The "axes" construction
    instead offsets best along each unit vector by sigma_n.
    """
    best = np.asarray(best, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    ndim = best.size
    lo, hi = bounds[:, 0], bounds[:, 1]
    if construction == "axes":
        verts = np.tile(best, (ndim + 1, 1))
        verts[1:] += np.diag(sigmas)
    elif construction == "sample":
        verts = np.empty((ndim + 1, ndim))
        verts[0] = best
        verts[1] = np.asarray(mode_point, dtype=float)
        half = sigmas / 2.0
        verts[2:] = rng.uniform(best - half, best + half, size=(ndim - 1, ndim))
    else:
        raise ValueError(f"unknown construction {construction!r}")
    return np.clip(verts, lo, hi)


def greedy_search(
    problem: Problem,
    est_cfg: EstimatorConfig,
    simplex_cfg: SimplexConfig,
    iterations: int,
    rng: RngStream,
    ablation: bool = False,
    construction: str = "sample",
    success_tol: float = 1e-3,
    stop_on_success: bool = True,
) -> HybridReport:
    """Alternate density-estimation sweeps with simplex refinements.

    One estimation sweep seeds the initial best point at the density
    mode; each subsequent iteration builds a population from the current
    best, the refreshed mode, and the fluctuation scales, runs the
    simplex, keeps strict improvements, then advances the estimate by
    one more sweep. With ablation=True the density machinery is skipped:
    the mode vertex is a uniform random point and the scales are the
    box-wide uniform-density sigmas.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    prob, counter = counted(problem)
    bounds = prob.bounds
    ndim = prob.dimension
    span = bounds[:, 1] - bounds[:, 0]
    f_opt = problem.known_optimum[1] if problem.known_optimum else None

    est: Optional[MarginalEstimate] = None
    state: Optional[SweepState] = None
    if not ablation:
        start = rng.uniform(bounds[:, 0], bounds[:, 1])
        state = SweepState(point=start, rng=rng)
        est = MarginalEstimate.empty(bounds, est_cfg.L, est_cfg.table_size)
        gibbs_sweep(prob, state, est_cfg, est)
        mode_pt = np.array([marginal_mode(est, n) for n in range(ndim)])
        sigmas = np.array([analytic_moments(est, n)[1] for n in range(ndim)])
    else:
        mode_pt = rng.uniform(bounds[:, 0], bounds[:, 1])
        sigmas = span / np.sqrt(12.0)

    best = mode_pt.copy()
    f_best = prob.cost(best)
    trace: list[tuple[int, float, int]] = [(0, f_best, counter.count)]
    success: Optional[bool] = None

    iterations_run = 0
    for it in range(1, iterations + 1):
        iterations_run = it
        pop = build_population(best, mode_pt, sigmas, rng, bounds, construction)
        x, fx, _ = nelder_mead(prob, pop, simplex_cfg)
        if fx < f_best:
            best, f_best = x, fx
        trace.append((it, f_best, counter.count))
        if f_opt is not None:
            success = abs(f_best - f_opt) < success_tol
            if success and stop_on_success:
                break
        if not ablation:
            gibbs_sweep(prob, state, est_cfg, est)
            mode_pt = np.array([marginal_mode(est, n) for n in range(ndim)])
            sigmas = np.array([analytic_moments(est, n)[1] for n in range(ndim)])
        else:
            mode_pt = rng.uniform(bounds[:, 0], bounds[:, 1])

    return HybridReport(
        best_point=best,
        best_value=f_best,
        trace=trace,
        success=success,
        evals_total=counter.count,
        iterations_run=iterations_run,
    )
