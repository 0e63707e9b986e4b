"""Type definitions for intermittent-sgd."""

import math
from dataclasses import dataclass, field, fields
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import numpy as np

from .errors import ConfigurationError


class Algorithm(str, Enum):
    """Distributed optimization algorithms simulated by the engine."""

    MBSGD = "mbsgd"
    LOCALSGD = "localsgd"
    SCAFFOLD = "scaffold"


class NoiseKind(str, Enum):
    """Law of the additive oracle noise."""

    GAUSSIAN_ISOTROPIC = "gaussian-isotropic"
    NONE = "none"


class Metric(str, Enum):
    """Suboptimality measures computed from a trace."""

    AVG_GRAD_NORM_SQ = "avg_grad_norm_sq"
    SCAFFOLD_PHASE2 = "scaffold_phase2"
    AVG_SUBOPTIMALITY = "avg_suboptimality"


class RateKind(str, Enum):
    """Convergence-rate formulas known to the theory module."""

    MBSGD = "mbsgd"
    LOCALSGD_CLASSIC = "localsgd_classic"
    LOCALSGD_CONVEX_PREV = "localsgd_convex_prev"
    SCAFFOLD_CLASSIC = "scaffold_classic"
    SCAFFOLD_QUADRATIC = "scaffold_quadratic"
    LOCALSGD_FASTER = "localsgd_faster"
    LOCALSGD_CONVEX = "localsgd_convex"
    LOCALSGD_HS = "localsgd_hs"
    SCAFFOLD_SPEEDUP = "scaffold_speedup"
    SCAFFOLD_LIPSCHITZ = "scaffold_lipschitz"


class FigureName(str, Enum):
    """Reproducible experiment figures."""

    FIG1_LEFT = "fig1_left"
    FIG1_RIGHT = "fig1_right"
    FIG2 = "fig2"
    FIG3 = "fig3"


E = TypeVar("E", bound=Enum)


def parse_enum(enum_cls: Type[E], value: Union[str, E], field_name: str) -> E:
    """Convert a string into a member of ``enum_cls``.

    Raises:
        ConfigurationError: If ``value`` names no member
    """
    if isinstance(value, enum_cls):
        return value
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(str(member.value) for member in enum_cls)
        raise ConfigurationError(
            f"Unknown {field_name} '{value}'. Expected one of: {choices}",
            field=field_name,
            value=value,
        )


def _check_keys(cls: Type[Any], data: Dict[str, Any]) -> None:
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigurationError(
                f"Unknown key '{key}' for {cls.__name__}", field=key, value=data[key]
            )


def _require(condition: bool, message: str, field_name: str, value: Any) -> None:
    if not condition:
        raise ConfigurationError(message, field=field_name, value=value)


@dataclass(frozen=True, eq=False)
class LocalObjective:
    """One worker's smoothed-Huber regression objective.

    Attributes:
        data_matrix: The ``m_i x d`` matrix A_i
        targets: The length-``m_i`` target vector y_i
        reg_weight: Weight of the non-convex regularizer (lambda)
        anchor: The point x*_i used to build the targets
    """

    data_matrix: np.ndarray
    targets: np.ndarray
    reg_weight: float
    anchor: np.ndarray

    def __post_init__(self) -> None:
        for name in ("data_matrix", "targets", "anchor"):
            array = np.array(getattr(self, name), dtype=np.float64)
            array.setflags(write=False)
            object.__setattr__(self, name, array)
        _require(
            self.reg_weight >= 0, "reg_weight must be non-negative", "reg_weight", self.reg_weight
        )
        _require(
            self.data_matrix.ndim == 2 and self.targets.shape == (self.data_matrix.shape[0],),
            "targets must have one entry per data row",
            "targets",
            self.targets.shape,
        )

    @property
    def dimension(self) -> int:
        """Number of columns of the data matrix."""
        return int(self.data_matrix.shape[1])


@dataclass(frozen=True)
class ConditioningTargets:
    """Conditioning values requested from the generator.

    ``zeta`` is None when the spread of the anchors was not calibrated and
    ``Delta`` is None when the anchors were not centred.
    """

    L: float
    zeta: Optional[float]
    delta: float
    Delta: Optional[float] = None


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """The n local objectives of one synthetic problem.

    Stacked copies of the worker data (``data``, ``target_stack``,
    ``anchors``, ``reg_weights``) are derived on construction and used for
    batched evaluation.

    Attributes:
        dimension: Problem dimension d
        num_workers: Number of workers n
        locals: The n local objectives
        seed: Seed the instance was generated from
        targets: Requested conditioning values
        scale_rows: Per-worker loss weight, n/m when omitted
        achieved: Conditioning values measured after calibration
        noise_scale: Calibrated data-noise scale (epsilon)
        anchor_scale: Calibrated anchor spread (s)
        center_scale: Calibrated distance of the common anchor centre (kappa)
    """

    dimension: int
    num_workers: int
    locals: Tuple[LocalObjective, ...]
    seed: int = 0
    targets: Optional[ConditioningTargets] = None
    scale_rows: Optional[np.ndarray] = None
    achieved: Dict[str, float] = field(default_factory=dict)
    noise_scale: float = 0.0
    anchor_scale: float = 0.0
    center_scale: float = 0.0

    data: np.ndarray = field(init=False, repr=False)
    target_stack: np.ndarray = field(init=False, repr=False)
    anchors: np.ndarray = field(init=False, repr=False)
    reg_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "locals", tuple(self.locals))
        _require(
            len(self.locals) == self.num_workers and self.num_workers > 0,
            f"Expected {self.num_workers} local objectives, got {len(self.locals)}",
            "locals",
            len(self.locals),
        )
        rows = {obj.data_matrix.shape[0] for obj in self.locals}
        dims = {obj.dimension for obj in self.locals}
        _require(
            dims == {self.dimension},
            "All local objectives must share the problem dimension",
            "dimension",
            sorted(dims),
        )
        _require(len(rows) == 1, "All workers must hold the same number of rows", "locals", rows)

        total_rows = sum(obj.data_matrix.shape[0] for obj in self.locals)
        if self.scale_rows is None:
            scale = np.full(self.num_workers, self.num_workers / total_rows)
        else:
            scale = np.array(self.scale_rows, dtype=np.float64)
        scale.setflags(write=False)
        object.__setattr__(self, "scale_rows", scale)

        stacks = {
            "data": np.stack([obj.data_matrix for obj in self.locals]),
            "target_stack": np.stack([obj.targets for obj in self.locals]),
            "anchors": np.stack([obj.anchor for obj in self.locals]),
            "reg_weights": np.array([obj.reg_weight for obj in self.locals], dtype=np.float64),
        }
        for name, array in stacks.items():
            array.setflags(write=False)
            object.__setattr__(self, name, array)


@dataclass
class GenerationSpec:
    """Knobs of the synthetic problem generator.

    Attributes:
        dimension: Problem dimension d
        num_workers: Number of workers n
        seed: Seed of every random draw made during generation
        target_L: Largest eigenvalue of the global loss Hessian
        target_zeta: Requested gradient similarity; None skips spread calibration
        target_delta: Requested Hessian similarity
        reg_weight: Regularizer weight (lambda)
        calibration_tolerance: Relative tolerance of every bisection
        calibration_max_iters: Maximum bisection steps per quantity and maximum calibration rounds
        target_Delta: Requested initial gap f(0) - f*; None keeps anchors centred at 0
    """

    dimension: int = 100
    num_workers: int = 10
    seed: int = 111
    target_L: float = 1.0
    target_zeta: Optional[float] = 0.03
    target_delta: float = 0.01
    reg_weight: float = 0.01
    calibration_tolerance: float = 0.05
    calibration_max_iters: int = 60
    target_Delta: Optional[float] = None

    def validate(self) -> None:
        """Check field ranges.

        Raises:
            ConfigurationError: If any field is out of range
        """
        _require(self.dimension > 0, "dimension must be positive", "dimension", self.dimension)
        _require(
            self.num_workers > 0, "num_workers must be positive", "num_workers", self.num_workers
        )
        _require(self.target_L > 0, "target_L must be positive", "target_L", self.target_L)
        _require(
            self.target_zeta is None or self.target_zeta >= 0,
            "target_zeta must be non-negative",
            "target_zeta",
            self.target_zeta,
        )
        _require(
            0 <= self.target_delta <= self.target_L,
            "target_delta must lie in [0, target_L]",
            "target_delta",
            self.target_delta,
        )
        _require(
            self.reg_weight >= 0, "reg_weight must be non-negative", "reg_weight", self.reg_weight
        )
        _require(
            self.calibration_tolerance > 0,
            "calibration_tolerance must be positive",
            "calibration_tolerance",
            self.calibration_tolerance,
        )
        _require(
            self.calibration_max_iters > 0,
            "calibration_max_iters must be positive",
            "calibration_max_iters",
            self.calibration_max_iters,
        )
        _require(
            self.target_Delta is None or self.target_Delta >= 0,
            "target_Delta must be non-negative",
            "target_Delta",
            self.target_Delta,
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GenerationSpec":
        """Build a validated spec from a JSON object."""
        _check_keys(cls, data)
        spec = cls(**data)
        spec.validate()
        return spec

    def to_dict(self) -> Dict[str, Any]:
        """Return the spec as a JSON-ready dictionary."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class OracleConfig:
    """Stochastic first-order oracle settings.

    Attributes:
        sigma: Root-mean-square norm of the additive noise
        seed: Seed of the counter-based noise streams
        noise_kind: Law of the additive noise
    """

    sigma: float = 0.0
    seed: int = 0
    noise_kind: NoiseKind = NoiseKind.GAUSSIAN_ISOTROPIC

    def __post_init__(self) -> None:
        object.__setattr__(self, "noise_kind", parse_enum(NoiseKind, self.noise_kind, "noise_kind"))
        _require(
            self.sigma >= 0 and math.isfinite(self.sigma),
            "sigma must be finite and non-negative",
            "sigma",
            self.sigma,
        )

    @property
    def effective_sigma(self) -> float:
        """Noise level actually applied by the oracle."""
        return 0.0 if self.noise_kind == NoiseKind.NONE else self.sigma


@dataclass(frozen=True)
class QueryKey:
    """Identifies one oracle draw.

    Attributes:
        worker: Worker index in ``[0, n)``
        iteration: Global iteration index t
        replica: Distinguishes repeated draws at the same (worker, iteration)
    """

    worker: int
    iteration: int
    replica: int = 0


@dataclass
class RunConfig:
    """Configuration of one algorithm run.

    Attributes:
        algorithm: Algorithm to simulate
        eta: Stepsize
        tau: Communication interval
        rounds: Rounds R (double-rounds for SCAFFOLD)
        init: Common starting point; None starts at the origin
        oracle: Oracle settings
        record_every: Record one trace entry every this many iterations
    """

    algorithm: Algorithm
    eta: float
    tau: int
    rounds: int
    init: Optional[np.ndarray] = None
    oracle: OracleConfig = field(default_factory=OracleConfig)
    record_every: int = 1

    @property
    def total_iterations(self) -> int:
        """Oracle queries per worker over the whole run."""
        factor = 2 if self.algorithm == Algorithm.SCAFFOLD else 1
        return factor * self.rounds * self.tau

    def validate(self, dimension: Optional[int] = None) -> None:
        """Check field ranges, and the init length when ``dimension`` is given.

        Raises:
            ConfigurationError: If any field is out of range
        """
        self.algorithm = parse_enum(Algorithm, self.algorithm, "algorithm")
        _require(
            self.eta > 0 and math.isfinite(self.eta), "eta must be positive", "eta", self.eta
        )
        _require(self.tau >= 1, "tau must be at least 1", "tau", self.tau)
        _require(self.rounds >= 1, "rounds must be at least 1", "rounds", self.rounds)
        _require(
            self.record_every >= 1,
            "record_every must be at least 1",
            "record_every",
            self.record_every,
        )
        if self.algorithm == Algorithm.SCAFFOLD:
            _require(self.tau >= 2, "SCAFFOLD requires tau >= 2", "tau", self.tau)
        if dimension is not None and self.init is not None:
            _require(
                np.shape(self.init) == (dimension,),
                f"init must have length {dimension}",
                "init",
                np.shape(self.init),
            )

    def describe(self) -> Dict[str, Any]:
        """Return a JSON-ready echo of the configuration."""
        return {
            "algorithm": self.algorithm.value,
            "eta": self.eta,
            "tau": self.tau,
            "rounds": self.rounds,
            "init": None if self.init is None else [float(v) for v in self.init],
            "sigma": self.oracle.sigma,
            "seed": self.oracle.seed,
            "noise_kind": self.oracle.noise_kind.value,
            "record_every": self.record_every,
        }


@dataclass
class WorkerState:
    """Mutable per-worker state during a run.

    Attributes:
        iterate: Current local iterate
        control_local: SCAFFOLD local control variate
        batch_accumulator: Sum of gradients queried in the current round
    """

    iterate: np.ndarray
    control_local: np.ndarray
    batch_accumulator: np.ndarray

    @classmethod
    def at(cls, point: np.ndarray) -> "WorkerState":
        """Create a state sitting at ``point`` with empty accumulators."""
        return cls(
            iterate=np.array(point, dtype=np.float64),
            control_local=np.zeros_like(point, dtype=np.float64),
            batch_accumulator=np.zeros_like(point, dtype=np.float64),
        )


@dataclass(frozen=True)
class TraceRecord:
    """Metrics of the averaged iterate at one iteration.

    Attributes:
        t: Iteration index, recorded before the update at t
        round: Protocol communication round containing t
        grad_norm_sq: Squared norm of the exact global gradient
        f_value: Global objective value
        consensus_sq: Mean squared distance of worker iterates to their average
    """

    t: int
    round: int
    grad_norm_sq: float
    f_value: float
    consensus_sq: float


@dataclass
class Trace:
    """Recorded trajectory of one run.

    Attributes:
        algorithm: Algorithm that produced the trace
        tau: Communication interval
        rounds: Rounds R of the run
        records: Recorded iterations in increasing t
        config: Echo of the run configuration
        seed: Oracle seed
        record_every: Recording stride
        final_iterate: Averaged iterate after the last round
        diverged: Whether the run stopped early on divergence
    """

    algorithm: Algorithm
    tau: int
    rounds: int
    records: List[TraceRecord] = field(default_factory=list)
    config: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    record_every: int = 1
    final_iterate: Optional[np.ndarray] = None
    diverged: bool = False

    @property
    def total_iterations(self) -> int:
        """Oracle queries per worker the run was configured for."""
        factor = 2 if self.algorithm == Algorithm.SCAFFOLD else 1
        return factor * self.rounds * self.tau

    def metadata(self) -> Dict[str, Any]:
        """Return the sidecar metadata of the trace."""
        return {
            "algorithm": self.algorithm.value,
            "tau": self.tau,
            "rounds": self.rounds,
            "seed": self.seed,
            "record_every": self.record_every,
            "diverged": self.diverged,
            "final_iterate": (
                None if self.final_iterate is None else [float(v) for v in self.final_iterate]
            ),
            "config": self.config,
        }


@dataclass
class ConditioningReport:
    """Estimated assumption constants of a problem instance."""

    L: float
    sigma: float
    zeta: float
    zeta_bar: float
    delta: float
    delta_bar: float
    rho: float
    M: float
    Delta: float
    sample_points: int
    sample_radius: float
    fstar_estimate: float
    seed: int
    approximate: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Return the report as a JSON-ready dictionary."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class SamplerConfig:
    """Layout of the conditioning point sampler.

    Attributes:
        num_points: Number of sampled points
        origin_radius: Radius of the points drawn around the origin
        anchor_radius: Radius of the points drawn around worker anchors
        seed: Seed of the per-point streams
        min_separation: Smallest pair separation for finite differences
        max_separation: Largest pair separation for finite differences
    """

    num_points: int = 64
    origin_radius: float = 1.0
    anchor_radius: float = 0.5
    seed: int = 20240101
    min_separation: float = 1e-3
    max_separation: float = 1e-1

    def validate(self) -> None:
        """Check field ranges.

        Raises:
            ConfigurationError: If any field is out of range
        """
        _require(self.num_points > 0, "num_points must be positive", "num_points", self.num_points)
        _require(
            self.origin_radius > 0 and self.anchor_radius > 0,
            "sampler radii must be positive",
            "origin_radius",
            (self.origin_radius, self.anchor_radius),
        )
        _require(
            0 < self.min_separation <= self.max_separation,
            "separations must satisfy 0 < min_separation <= max_separation",
            "min_separation",
            (self.min_separation, self.max_separation),
        )


_RATE_SYMBOLS = ("L", "Delta", "sigma", "zeta", "zeta_bar", "delta", "delta_bar", "rho", "M", "D")


@dataclass
class RateParams:
    """Symbols appearing in the convergence-rate formulas.

    Real-valued symbols default to None; each rate kind declares which of
    them it requires.
    """

    L: Optional[float] = None
    Delta: Optional[float] = None
    sigma: Optional[float] = None
    zeta: Optional[float] = None
    zeta_bar: Optional[float] = None
    delta: Optional[float] = None
    delta_bar: Optional[float] = None
    rho: Optional[float] = None
    M: Optional[float] = None
    D: Optional[float] = None
    n: int = 1
    tau: int = 1
    R: int = 1

    def validate(self) -> None:
        """Check signs and the assumption ranges between symbols.

        Raises:
            ConfigurationError: If any field is out of range
        """
        for name in _RATE_SYMBOLS:
            value = getattr(self, name)
            _require(
                value is None or (value >= 0 and not math.isnan(value)),
                f"{name} must be non-negative",
                name,
                value,
            )
        for name in ("n", "tau", "R"):
            value = getattr(self, name)
            _require(value >= 1, f"{name} must be a positive integer", name, value)
        if self.L is not None:
            if self.rho is not None:
                _require(self.rho <= self.L, "rho must not exceed L", "rho", self.rho)
            if self.delta is not None:
                _require(self.delta <= self.L, "delta must not exceed L", "delta", self.delta)
            if self.delta_bar is not None:
                _require(
                    self.delta_bar <= 2 * self.L,
                    "delta_bar must not exceed 2L",
                    "delta_bar",
                    self.delta_bar,
                )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RateParams":
        """Build validated parameters from a JSON object."""
        _check_keys(cls, data)
        params = cls(**data)
        params.validate()
        return params

    def replace(self, **changes: Any) -> "RateParams":
        """Return a copy with some fields changed."""
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return RateParams(**values)


@dataclass
class RateBound:
    """Per-term evaluation of a convergence-rate formula.

    Attributes:
        kind: The rate formula
        terms: Term values in display order
        total: Sum of the terms
    """

    kind: RateKind
    terms: Dict[str, float]
    total: float

    def to_dict(self) -> Dict[str, Any]:
        """Return the bound as a JSON-ready dictionary."""
        return {"kind": self.kind.value, "terms": dict(self.terms), "total": self.total}


@dataclass
class CheckResult:
    """Outcome of one numerical inequality check.

    Attributes:
        lemma: Name of the inequality
        lhs: Value of the side that must be smaller
        rhs: Value of the side that must be larger
        holds: Whether lhs <= rhs within tolerance
        slack: rhs - lhs
        details: Additional named quantities
    """

    lemma: str
    lhs: float
    rhs: float
    holds: bool
    slack: float
    details: Dict[str, float] = field(default_factory=dict)


@dataclass
class LemmaSuiteReport:
    """Summary of a randomized inequality suite."""

    lemma: str
    draws: int
    violations: int
    worst_slack: float

    def to_dict(self) -> Dict[str, Any]:
        """Return the report as a JSON-ready dictionary."""
        return {
            "lemma": self.lemma,
            "draws": self.draws,
            "violations": self.violations,
            "worst_slack": self.worst_slack,
        }


DEFAULT_STEPSIZE_GRID: Tuple[float, ...] = (0.0003, 0.001, 0.003, 0.01, 0.03, 0.1, 0.3)
DEFAULT_SEEDS: Tuple[int, ...] = (111, 222, 333)


@dataclass
class ExperimentSpec:
    """A stepsize-tuning experiment.

    Attributes:
        problem: Generation spec or path to a saved problem bundle
        algorithms: Algorithms to tune
        tau: Communication interval
        rounds: Protocol communication rounds
        stepsize_grid: Candidate stepsizes
        seeds: Oracle seeds averaged per stepsize
        sigma: Oracle noise level
        metric: Tuning criterion
        output_dir: Directory receiving traces and the tuning result
    """

    problem: Union[GenerationSpec, str] = field(default_factory=GenerationSpec)
    algorithms: List[Algorithm] = field(
        default_factory=lambda: [Algorithm.MBSGD, Algorithm.LOCALSGD]
    )
    tau: int = 50
    rounds: int = 50
    stepsize_grid: List[float] = field(default_factory=lambda: list(DEFAULT_STEPSIZE_GRID))
    seeds: List[int] = field(default_factory=lambda: list(DEFAULT_SEEDS))
    sigma: float = 0.01
    metric: Metric = Metric.AVG_GRAD_NORM_SQ
    output_dir: str = "out"

    def validate(self) -> None:
        """Check field ranges and normalize enum fields.

        Raises:
            ConfigurationError: If any field is out of range
        """
        self.algorithms = [parse_enum(Algorithm, a, "algorithm") for a in self.algorithms]
        self.metric = parse_enum(Metric, self.metric, "metric")
        _require(len(self.algorithms) > 0, "algorithms must not be empty", "algorithms", [])
        _require(
            len(self.stepsize_grid) > 0, "stepsize_grid must not be empty", "stepsize_grid", []
        )
        _require(len(self.seeds) > 0, "seeds must not be empty", "seeds", [])
        _require(
            all(eta > 0 for eta in self.stepsize_grid),
            "stepsizes must be positive",
            "stepsize_grid",
            self.stepsize_grid,
        )
        _require(self.tau >= 1, "tau must be at least 1", "tau", self.tau)
        _require(self.rounds >= 1, "rounds must be at least 1", "rounds", self.rounds)
        _require(self.sigma >= 0, "sigma must be non-negative", "sigma", self.sigma)
        if Algorithm.SCAFFOLD in self.algorithms:
            _require(self.tau >= 2, "SCAFFOLD requires tau >= 2", "tau", self.tau)
            _require(
                self.rounds >= 2,
                "SCAFFOLD needs at least two protocol rounds",
                "rounds",
                self.rounds,
            )
        if isinstance(self.problem, GenerationSpec):
            self.problem.validate()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentSpec":
        """Build a validated spec from a JSON object.

        ``problem`` is either a nested generation spec object or a bundle path.
        """
        _check_keys(cls, data)
        values = dict(data)
        problem = values.get("problem")
        if isinstance(problem, dict):
            values["problem"] = GenerationSpec.from_dict(problem)
        spec = cls(**values)
        spec.validate()
        return spec

    def to_dict(self) -> Dict[str, Any]:
        """Return the spec as a JSON-ready dictionary."""
        problem: Any = self.problem
        if isinstance(problem, GenerationSpec):
            problem = problem.to_dict()
        return {
            "problem": problem,
            "algorithms": [a.value for a in self.algorithms],
            "tau": self.tau,
            "rounds": self.rounds,
            "stepsize_grid": list(self.stepsize_grid),
            "seeds": list(self.seeds),
            "sigma": self.sigma,
            "metric": self.metric.value,
            "output_dir": self.output_dir,
        }


@dataclass
class TuningCell:
    """Results of one (algorithm, stepsize) grid point across seeds."""

    algorithm: Algorithm
    stepsize: float
    seed_metrics: Dict[int, float]
    diverged: Dict[int, bool]
    mean_metric: float


@dataclass
class TuningResult:
    """Outcome of a stepsize grid search.

    Attributes:
        cells: Grid points sorted by (algorithm, stepsize)
        chosen: Selected stepsize per algorithm
    """

    cells: List[TuningCell]
    chosen: Dict[Algorithm, float]

    def cells_for(self, algorithm: Algorithm) -> List[TuningCell]:
        """Return the grid points of one algorithm."""
        return [cell for cell in self.cells if cell.algorithm == algorithm]

    def to_dict(self) -> Dict[str, Any]:
        """Return the result as a JSON-ready dictionary."""
        return {
            "cells": [
                {
                    "algorithm": cell.algorithm.value,
                    "stepsize": cell.stepsize,
                    "mean_metric": cell.mean_metric,
                    "seed_metrics": {str(s): v for s, v in sorted(cell.seed_metrics.items())},
                    "diverged": {str(s): v for s, v in sorted(cell.diverged.items())},
                }
                for cell in self.cells
            ],
            "chosen": {a.value: self.chosen[a] for a in sorted(self.chosen, key=lambda a: a.value)},
        }


@dataclass
class TuningProgress:
    """Progress information reported after each grid run completes.

    Attributes:
        completed_runs: Number of finished runs
        total_runs: Total number of runs in the grid
        algorithm: Algorithm of the run that just finished
        stepsize: Stepsize of the run that just finished
        seed: Seed of the run that just finished
    """

    completed_runs: int
    total_runs: int
    algorithm: Algorithm
    stepsize: float
    seed: int


# Type alias for tuning progress callback
TuningProgressCallback = Callable[[TuningProgress], None]


@dataclass
class RunnerOptions:
    """Configuration options for ExperimentRunner.

    Attributes:
        max_workers: Number of grid runs executed concurrently
        on_progress: Optional callback receiving a TuningProgress per finished run
    """

    max_workers: int = 1
    on_progress: Optional[TuningProgressCallback] = None


@dataclass
class FigureConfig:
    """Settings shared by the figure reproductions.

    Defaults match the published experiment; tests shrink them.

    Attributes:
        dimension: Problem dimension d
        num_workers: Number of workers n
        reg_weight: Base regularizer weight
        target_L: Largest eigenvalue of the global loss Hessian
        target_Delta: Initial gap at the origin
        base_zeta: Gradient similarity held fixed while other knobs sweep
        base_delta: Hessian similarity held fixed in LocalSGD sweeps
        scaffold_base_delta: Hessian similarity held fixed in SCAFFOLD sweeps
        fig1_left_deltas: Hessian similarities of the LocalSGD comparison
        fig1_right_deltas: Hessian similarities of the SCAFFOLD comparison
        zeta_sweep: Gradient similarities swept in the LocalSGD sweep
        delta_sweep: Hessian similarities swept in the LocalSGD sweep
        reg_sweep: Regularizer weights swept in both sweeps
        scaffold_delta_sweep: Hessian similarities swept in the SCAFFOLD sweep
        sigma: Oracle noise level
        tau: Communication interval
        rounds: Protocol communication rounds
        early_round: Protocol round of the early checkpoint
        stepsize_grid: Candidate stepsizes
        seeds: Oracle seeds
        generation_seed: Seed of every generated instance
        calibration_tolerance: Relative tolerance of the generator bisections
        mbsgd_spread: Allowed relative spread of MbSGD around its mean
    """

    dimension: int = 100
    num_workers: int = 10
    reg_weight: float = 0.01
    target_L: float = 1.0
    target_Delta: Optional[float] = 1.0
    base_zeta: float = 0.03
    base_delta: float = 0.01
    scaffold_base_delta: float = 0.1
    fig1_left_deltas: Tuple[float, ...] = (0.01, 0.02, 0.03)
    fig1_right_deltas: Tuple[float, ...] = (0.1, 0.2, 0.3)
    zeta_sweep: Tuple[float, ...] = (0.03, 0.04, 0.05, 0.06, 0.07)
    delta_sweep: Tuple[float, ...] = (0.01, 0.015, 0.02, 0.025, 0.03)
    reg_sweep: Tuple[float, ...] = (0.01, 0.015, 0.02, 0.025, 0.03)
    scaffold_delta_sweep: Tuple[float, ...] = (0.1, 0.15, 0.2, 0.25, 0.3)
    sigma: float = 0.01
    tau: int = 50
    rounds: int = 50
    early_round: int = 10
    stepsize_grid: Tuple[float, ...] = DEFAULT_STEPSIZE_GRID
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    generation_seed: int = 111
    calibration_tolerance: float = 0.05
    mbsgd_spread: float = 0.2

    def validate(self) -> None:
        """Check the checkpoints against the round budget.

        Raises:
            ConfigurationError: If any field is out of range
        """
        _require(self.rounds >= 2, "rounds must be at least 2", "rounds", self.rounds)
        _require(
            self.rounds % 2 == 0,
            "rounds must be even so SCAFFOLD double-rounds fit",
            "rounds",
            self.rounds,
        )
        _require(
            2 <= self.early_round <= self.rounds and self.early_round % 2 == 0,
            "early_round must be an even round within the budget",
            "early_round",
            self.early_round,
        )
        _require(self.tau >= 2, "tau must be at least 2", "tau", self.tau)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FigureConfig":
        """Build a validated config from a JSON object; sequences become tuples."""
        _check_keys(cls, data)
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
        config = cls(**values)
        config.validate()
        return config


@dataclass
class Curve:
    """One plotted series.

    Attributes:
        label: Legend label
        xs: Protocol communication rounds
        ys: Metric values
    """

    label: str
    xs: Sequence[float]
    ys: Sequence[float]


@dataclass(frozen=True)
class FigurePoint:
    """One persisted data point of a figure.

    Attributes:
        algorithm: Algorithm of the series
        parameter: Name of the varied conditioning parameter
        value: Value of the varied parameter
        round: Protocol communication round of the point
        metric: Three-seed mean metric
    """

    algorithm: Algorithm
    parameter: str
    value: float
    round: int
    metric: float


@dataclass
class FigureReport:
    """Outcome of a figure reproduction.

    Attributes:
        name: The reproduced figure
        passed: Whether the qualitative verdict holds
        checks: Named verdict quantities (values compared and the outcome)
        artifacts: Paths of the written files
    """

    name: FigureName
    passed: bool
    checks: Dict[str, Any] = field(default_factory=dict)
    artifacts: List[str] = field(default_factory=list)


# Export all public types
__all__ = [
    "Algorithm",
    "NoiseKind",
    "Metric",
    "RateKind",
    "FigureName",
    "parse_enum",
    "LocalObjective",
    "ConditioningTargets",
    "ProblemInstance",
    "GenerationSpec",
    "OracleConfig",
    "QueryKey",
    "RunConfig",
    "WorkerState",
    "TraceRecord",
    "Trace",
    "ConditioningReport",
    "SamplerConfig",
    "RateParams",
    "RateBound",
    "CheckResult",
    "LemmaSuiteReport",
    "DEFAULT_STEPSIZE_GRID",
    "DEFAULT_SEEDS",
    "ExperimentSpec",
    "TuningCell",
    "TuningResult",
    "TuningProgress",
    "TuningProgressCallback",
    "RunnerOptions",
    "FigureConfig",
    "Curve",
    "FigurePoint",
    "FigureReport",
]
