"""Smoothing by repeated window averaging and regularized Newton methods for
Lipschitz convex minimization."""

from .corpus import ObjectiveSpec, evaluate, get_problem, list_corpus, reference_smoothed, subgradient
from .estimators import SteklovNewton, SteklovSmoother
from .exceptions import (
    CapabilityError,
    ConfigError,
    DegenerateDomainError,
    DimensionError,
    EstimatorFailure,
    IndefiniteHessianError,
    InsufficientDataError,
    LineSearchExhausted,
    StekoptError,
)
from .harness import (
    ReportSummary,
    RunSpec,
    estimate_rate,
    recompute_summary_from_trace,
    run_baseline_subgradient,
    run_from_spec,
)
from .model import RegularizedSurrogate, check_hessian_sandwich, surrogate_gradient, surrogate_hessian, surrogate_value
from .properties import run_property_suite
from .smoothing import (
    AveragingDomain,
    EstimatorConfig,
    SmoothingEstimate,
    certified_hessian_bound,
    diameter,
    double_average_gradient,
    double_average_hessian,
    double_average_value,
    gradient_norm_bound_constant,
    hessian_lipschitz_constant,
    measure,
    single_average_gradient,
    single_average_value,
)
from .solver import (
    IterationRecord,
    SolverConfig,
    SolverResult,
    check_eps_stationarity,
    coherence_update_alg1,
    coherence_update_alg2,
    line_search,
    newton_step,
    run_stationary_search,
    run_superlinear,
)

__version__ = "0.1.0"
