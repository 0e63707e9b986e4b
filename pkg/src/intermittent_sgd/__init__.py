"""intermittent-sgd - MbSGD, LocalSGD and SCAFFOLD under intermittent communication.

This package generates synthetic distributed problems with controllable
similarity and convexity, simulates the three algorithms exactly, estimates
the assumption constants of an instance, evaluates the convergence-rate
formulas and checks the supporting inequalities numerically.

Example:
    >>> from intermittent_sgd import GenerationSpec, RunConfig, generate_problem, run_algorithm
    >>> p = generate_problem(GenerationSpec(dimension=20, num_workers=4))
    >>> trace = run_algorithm(p, RunConfig(algorithm="localsgd", eta=0.1, tau=10, rounds=20))
    >>> trace.records[-1].grad_norm_sq
"""

import logging

__version__ = "0.1.0"

# Import simulation engines and metrics
from .algorithms import (
    compute_metric,
    metric_avg_grad_norm_sq,
    metric_avg_suboptimality,
    metric_scaffold_phase2,
    run_algorithm,
    run_localsgd,
    run_mbsgd,
    run_scaffold,
    running_metric_curve,
)

# Import conditioning estimators
from .conditioning import (
    PointSampler,
    approximate_fstar,
    estimate_conditioning,
    estimate_delta,
    estimate_delta_bar,
    estimate_Delta,
    estimate_L,
    estimate_M,
    estimate_rho,
    estimate_zeta,
    estimate_zeta_bar,
)

# Import all error classes
from .errors import (
    ArtifactError,
    CalibrationError,
    ConfigurationError,
    DegenerateParametersError,
    EmptyTraceError,
    IntermittentSGDError,
    MissingParameterError,
    PreconditionError,
    TraceMismatchError,
    TuningError,
    WorkerIndexError,
)

# Import the experiment runner
from .harness import ExperimentRunner, StepsizeGrid, evaluate_verdict

# Import the stochastic oracle
from .oracle import sample_gradient, sample_gradients, sample_noise

# Import artifact helpers
from .persistence import (
    export_summary_json,
    export_trace_csv,
    load_problem,
    load_trace,
    read_trace_csv,
    render_plot_svg,
    save_problem,
)

# Import problem construction and evaluation
from .problem import (
    build_problem,
    generate_problem,
    global_grad,
    global_hess,
    global_value,
    local_grad,
    local_hess,
    local_value,
)

# Import theory calculators and inequality checks
from .theory import (
    asymptotic_rate,
    check_q_bounds,
    check_smooth_contraction,
    check_smooth_weakly_convex_inequality,
    check_variance_identity,
    check_weak_convexity_contraction,
    rate_bound,
    stepsize_terms,
    theoretical_stepsize,
    verify_lemmas,
)

# Import all types
from .types import (
    Algorithm,
    CheckResult,
    ConditioningReport,
    Curve,
    ExperimentSpec,
    FigureConfig,
    FigureName,
    FigureReport,
    GenerationSpec,
    LemmaSuiteReport,
    LocalObjective,
    Metric,
    NoiseKind,
    OracleConfig,
    ProblemInstance,
    QueryKey,
    RateBound,
    RateKind,
    RateParams,
    RunConfig,
    RunnerOptions,
    SamplerConfig,
    Trace,
    TraceRecord,
    TuningProgress,
    TuningResult,
)

# Import utility functions
from .utils import validate_environment

logging.getLogger(__name__).addHandler(logging.NullHandler())

# Define public API
__all__ = [
    # Version
    "__version__",
    # Runner
    "ExperimentRunner",
    "StepsizeGrid",
    "evaluate_verdict",
    # Problem
    "build_problem",
    "generate_problem",
    "local_value",
    "local_grad",
    "local_hess",
    "global_value",
    "global_grad",
    "global_hess",
    # Oracle
    "sample_noise",
    "sample_gradient",
    "sample_gradients",
    # Algorithms
    "run_mbsgd",
    "run_localsgd",
    "run_scaffold",
    "run_algorithm",
    "metric_avg_grad_norm_sq",
    "metric_scaffold_phase2",
    "metric_avg_suboptimality",
    "compute_metric",
    "running_metric_curve",
    # Conditioning
    "PointSampler",
    "estimate_L",
    "estimate_zeta",
    "estimate_zeta_bar",
    "estimate_delta",
    "estimate_delta_bar",
    "estimate_rho",
    "estimate_M",
    "estimate_Delta",
    "approximate_fstar",
    "estimate_conditioning",
    # Theory
    "rate_bound",
    "asymptotic_rate",
    "stepsize_terms",
    "theoretical_stepsize",
    "check_variance_identity",
    "check_weak_convexity_contraction",
    "check_smooth_contraction",
    "check_q_bounds",
    "check_smooth_weakly_convex_inequality",
    "verify_lemmas",
    # Persistence
    "save_problem",
    "load_problem",
    "export_trace_csv",
    "read_trace_csv",
    "load_trace",
    "export_summary_json",
    "render_plot_svg",
    # Types
    "Algorithm",
    "NoiseKind",
    "Metric",
    "RateKind",
    "FigureName",
    "LocalObjective",
    "ProblemInstance",
    "GenerationSpec",
    "OracleConfig",
    "QueryKey",
    "RunConfig",
    "Trace",
    "TraceRecord",
    "ConditioningReport",
    "SamplerConfig",
    "RateParams",
    "RateBound",
    "CheckResult",
    "LemmaSuiteReport",
    "ExperimentSpec",
    "TuningResult",
    "TuningProgress",
    "RunnerOptions",
    "FigureConfig",
    "FigureReport",
    "Curve",
    # Errors
    "IntermittentSGDError",
    "ConfigurationError",
    "WorkerIndexError",
    "CalibrationError",
    "EmptyTraceError",
    "TraceMismatchError",
    "MissingParameterError",
    "DegenerateParametersError",
    "PreconditionError",
    "TuningError",
    "ArtifactError",
    # Utils
    "validate_environment",
]
