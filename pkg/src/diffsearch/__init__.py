"""Stationary-density estimation for stochastic search.

The estimator solves the stationary conditional CDF of a diffusive
search process coordinate by coordinate (sine-basis collocation of the
associated boundary value problem) inside Gibbs sweeps, and averages the
expansion coefficients into marginal density estimates. On top of that
sit benchmark problems, a penalty-transformed knapsack pipeline with an
exact oracle, a greedy density-guided simplex heuristic, and a
reproducible CLI experiment runner.
"""

from .errors import (
    DiffsearchError,
    DimensionError,
    DomainError,
    InvalidDistribution,
    NonFiniteCost,
    OracleTooLarge,
    SingularSystem,
    UnknownProblem,
)
from .fokker import (
    CdfExpansion,
    EstimatorConfig,
    MarginalEstimate,
    SampledCdf,
    SweepState,
    analytic_moments,
    build_conditional_cdf,
    estimate_marginals,
    evaluate_cdf,
    evaluate_pdf,
    gibbs_sweep,
    marginal_mode,
    probability_interval,
    sample_inverse,
    simulate_langevin,
    tabulate_and_repair,
)
from .hybrid import HybridReport, SimplexConfig, build_population, greedy_search, nelder_mead
from .numerics import DenseSystem, RngStream, numerical_partial, solve_dense_linear
from .problems import (
    BarrierParams,
    EvalCounter,
    KnapsackInstance,
    Problem,
    benchmark_names,
    counted,
    flips_from_distance,
    generate_instance,
    knapsack_transform,
    load_instance,
    make_benchmark,
    normalized_distance,
    round_to_binary,
    save_instance,
    solve_knapsack_exact,
)

__version__ = "0.1.0"
