"""Experiment orchestration: stepsize tuning and figure reproduction."""

import concurrent.futures
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

from .algorithms import compute_metric, run_algorithm, running_metric_curve
from .conditioning import approximate_fstar
from .errors import ConfigurationError, IntermittentSGDError, TuningError
from .persistence import (
    curves_from_points,
    export_summary_json,
    export_trace_csv,
    load_problem,
    read_figure_data,
    read_json,
    render_plot_svg,
    write_figure_data,
)
from .problem import generate_problem
from .types import (
    Algorithm,
    Curve,
    ExperimentSpec,
    FigureConfig,
    FigureName,
    FigurePoint,
    FigureReport,
    GenerationSpec,
    Metric,
    OracleConfig,
    ProblemInstance,
    RunConfig,
    RunnerOptions,
    Trace,
    TuningCell,
    TuningProgress,
    TuningResult,
    parse_enum,
)
from .utils import least_squares_slope, validate_environment

logger = logging.getLogger(__name__)

ProblemSource = Union[GenerationSpec, str, Path, ProblemInstance]

FIGURE_DATA = "data.csv"
FIGURE_SUMMARY = "summary.json"


def resolve_problem(source: ProblemSource) -> ProblemInstance:
    """Return the instance described by a generation spec, bundle path or instance."""
    if isinstance(source, ProblemInstance):
        return source
    if isinstance(source, GenerationSpec):
        return generate_problem(source)
    return load_problem(source)


def protocol_rounds_to_run(algorithm: Algorithm, rounds: int) -> int:
    """Outer rounds giving ``rounds`` protocol rounds; SCAFFOLD uses two per outer round."""
    return rounds // 2 if algorithm == Algorithm.SCAFFOLD else rounds


@dataclass
class StepsizeGrid:
    """Everything a grid search needs besides the problem.

    ``traces`` is filled by :meth:`ExperimentRunner.run_grid`, keyed by
    (algorithm, stepsize, seed).
    """

    algorithms: Sequence[Algorithm]
    stepsizes: Sequence[float]
    seeds: Sequence[int]
    tau: int
    rounds: int
    sigma: float
    metric: Metric
    f_star: Optional[float] = None
    traces: Dict[Tuple[Algorithm, float, int], Trace] = field(default_factory=dict)


class ExperimentRunner:
    """Runs stepsize grids and figure reproductions.

    Grid runs are independent and execute on a thread pool; results are
    aggregated in sorted (algorithm, stepsize, seed) order, so the outcome
    does not depend on completion order.

    Example:
        >>> with ExperimentRunner(max_workers=4) as runner:
        ...     result = runner.tune(ExperimentSpec(tau=10, rounds=20))
        >>> result.chosen
    """

    def __init__(self, **kwargs: Any) -> None:
        """Initialize the runner.

        Args:
            **kwargs: Options from RunnerOptions
                - max_workers: Concurrent grid runs (default: 1)
                - on_progress: Callback receiving a TuningProgress per finished run
        """
        validate_environment()
        self._options = RunnerOptions(
            max_workers=kwargs.get("max_workers", 1),
            on_progress=kwargs.get("on_progress"),
        )
        if self._options.max_workers < 1:
            raise ConfigurationError(
                "max_workers must be at least 1",
                field="max_workers",
                value=self._options.max_workers,
            )
        self._executor = concurrent.futures.ThreadPoolExecutor(
            max_workers=self._options.max_workers
        )

    def __enter__(self) -> "ExperimentRunner":
        """Context manager entry."""
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        """Context manager exit - shuts down the thread pool."""
        self.close()

    def close(self) -> None:
        """Shut down the thread pool."""
        self._executor.shutdown(wait=True)

    def run_grid(self, p: ProblemInstance, grid: StepsizeGrid) -> TuningResult:
        """Run every (algorithm, stepsize, seed) of ``grid`` on ``p`` and pick stepsizes.

        Traces are stored in ``grid.traces``; nothing is written to disk.

        Raises:
            TuningError: If every stepsize diverged for some algorithm
        """
        jobs = [
            (algorithm, eta, seed)
            for algorithm in grid.algorithms
            for eta in sorted(grid.stepsizes)
            for seed in grid.seeds
        ]

        def run_one(job: Tuple[Algorithm, float, int]) -> Tuple[float, Trace]:
            algorithm, eta, seed = job
            cfg = RunConfig(
                algorithm=algorithm,
                eta=eta,
                tau=grid.tau,
                rounds=protocol_rounds_to_run(algorithm, grid.rounds),
                oracle=OracleConfig(sigma=grid.sigma, seed=seed),
            )
            trace = run_algorithm(p, cfg)
            return compute_metric(trace, grid.metric, grid.f_star), trace

        futures = {self._executor.submit(run_one, job): job for job in jobs}
        outcomes: Dict[Tuple[Algorithm, float, int], float] = {}
        try:
            for future in concurrent.futures.as_completed(futures):
                job = futures[future]
                metric, trace = future.result()
                outcomes[job] = metric
                grid.traces[job] = trace
                logger.debug("Run %s eta=%g seed=%d: metric=%.6g", *job, metric)
                if self._options.on_progress:
                    self._options.on_progress(
                        TuningProgress(
                            completed_runs=len(outcomes),
                            total_runs=len(jobs),
                            algorithm=job[0],
                            stepsize=job[1],
                            seed=job[2],
                        )
                    )
        except Exception:
            for pending in futures:
                pending.cancel()
            raise

        cells: List[TuningCell] = []
        chosen: Dict[Algorithm, float] = {}
        for algorithm in grid.algorithms:
            best: Optional[TuningCell] = None
            for eta in sorted(grid.stepsizes):
                seed_metrics = {seed: outcomes[(algorithm, eta, seed)] for seed in grid.seeds}
                diverged = {
                    seed: grid.traces[(algorithm, eta, seed)].diverged for seed in grid.seeds
                }
                total = 0.0
                for seed in grid.seeds:
                    total += seed_metrics[seed]
                cell = TuningCell(
                    algorithm=algorithm,
                    stepsize=eta,
                    seed_metrics=seed_metrics,
                    diverged=diverged,
                    mean_metric=total / len(grid.seeds),
                )
                cells.append(cell)
                if math.isfinite(cell.mean_metric) and (
                    best is None or cell.mean_metric < best.mean_metric
                ):
                    best = cell
            if best is None:
                raise TuningError(
                    f"Every stepsize diverged for {algorithm.value}", algorithm=algorithm.value
                )
            chosen[algorithm] = best.stepsize
            logger.info(
                "Tuned %s: eta=%g (mean metric %.6g)",
                algorithm.value,
                best.stepsize,
                best.mean_metric,
            )
        return TuningResult(cells=cells, chosen=chosen)

    def tune(
        self,
        spec: ExperimentSpec,
        problem: Optional[ProblemInstance] = None,
        output_dir: Optional[Union[str, Path]] = None,
    ) -> TuningResult:
        """Run the stepsize grid of ``spec`` and persist every trace and the result.

        Args:
            spec: The experiment
            problem: Instance to use instead of resolving ``spec.problem``
            output_dir: Directory overriding ``spec.output_dir``

        Returns:
            The tuning table and the chosen stepsize per algorithm

        Raises:
            ConfigurationError: If the spec is invalid
            TuningError: If every stepsize diverged for some algorithm
        """
        spec.validate()
        p = problem if problem is not None else resolve_problem(spec.problem)
        out = Path(output_dir if output_dir is not None else spec.output_dir)
        f_star = approximate_fstar(p) if spec.metric == Metric.AVG_SUBOPTIMALITY else None
        grid = StepsizeGrid(
            algorithms=spec.algorithms,
            stepsizes=spec.stepsize_grid,
            seeds=spec.seeds,
            tau=spec.tau,
            rounds=spec.rounds,
            sigma=spec.sigma,
            metric=spec.metric,
            f_star=f_star,
        )
        result = self.run_grid(p, grid)
        for (algorithm, eta, seed), trace in sorted(
            grid.traces.items(), key=lambda item: (item[0][0].value, item[0][1], item[0][2])
        ):
            export_trace_csv(trace, out / "traces" / _trace_name(algorithm, eta, seed))
        export_summary_json(
            {
                "spec": spec.to_dict(),
                "conditioning": _problem_summary(p),
                "f_star": f_star,
                "tuning": result.to_dict(),
            },
            out / "tuning.json",
        )
        return result

    def reproduce_figure(
        self,
        name: Union[FigureName, str],
        output_dir: Union[str, Path],
        config: Optional[FigureConfig] = None,
    ) -> FigureReport:
        """Regenerate one figure's data, plots and verdict under ``output_dir/<name>``.

        Raises:
            CalibrationError: If an instance cannot be generated
            TuningError: If every stepsize diverged for some algorithm
        """
        name = parse_enum(FigureName, name, "figure")
        config = config or FigureConfig()
        config.validate()
        out = Path(output_dir) / name.value
        logger.info("Reproducing %s into %s", name.value, out)
        builder = _FigureBuilder(self, config, out)
        if name == FigureName.FIG1_LEFT:
            builder.comparison(Algorithm.LOCALSGD, config.fig1_left_deltas, config.base_zeta)
        elif name == FigureName.FIG1_RIGHT:
            builder.comparison(Algorithm.SCAFFOLD, config.fig1_right_deltas, None)
        elif name == FigureName.FIG2:
            builder.localsgd_sweeps()
        else:
            builder.scaffold_sweeps()

        artifacts = builder.write(name)
        report = judge(name, builder.points, config)
        report.artifacts = [str(path) for path in artifacts]
        export_summary_json(
            {
                "figure": name.value,
                "config": asdict(config),
                "instances": builder.instances,
                "tuning": builder.tuning,
                "verdict": {"passed": report.passed, "checks": report.checks},
            },
            out / FIGURE_SUMMARY,
        )
        report.artifacts.append(str(out / FIGURE_SUMMARY))
        log = logger.info if report.passed else logger.warning
        log("%s verdict: %s", name.value, "passed" if report.passed else "failed")
        return report


def _trace_name(algorithm: Algorithm, eta: float, seed: int) -> str:
    return f"{algorithm.value}_eta{eta:g}_seed{seed}.csv"


def _problem_summary(p: ProblemInstance) -> Dict[str, Any]:
    targets = None if p.targets is None else asdict(p.targets)
    return {
        "dimension": p.dimension,
        "num_workers": p.num_workers,
        "seed": p.seed,
        "targets": targets,
        "achieved": dict(p.achieved),
        "noise_scale": p.noise_scale,
        "anchor_scale": p.anchor_scale,
        "center_scale": p.center_scale,
    }


class _FigureBuilder:
    """Generates the instances of one figure, tunes them and collects points."""

    def __init__(self, runner: ExperimentRunner, config: FigureConfig, out: Path) -> None:
        self.runner = runner
        self.config = config
        self.out = out
        self.points: List[FigurePoint] = []
        self.instances: List[Dict[str, Any]] = []
        self.tuning: Dict[str, Any] = {}
        self._problems: Dict[Tuple[Any, ...], ProblemInstance] = {}
        self._plots: List[Tuple[str, List[Curve], Dict[str, Any]]] = []

    def _problem(
        self, zeta: Optional[float], delta: float, reg_weight: float
    ) -> Tuple[str, ProblemInstance]:
        cfg = self.config
        spec = GenerationSpec(
            dimension=cfg.dimension,
            num_workers=cfg.num_workers,
            seed=cfg.generation_seed,
            target_L=cfg.target_L,
            target_zeta=zeta,
            target_delta=delta,
            reg_weight=reg_weight,
            calibration_tolerance=cfg.calibration_tolerance,
            target_Delta=cfg.target_Delta,
        )
        label = f"zeta={zeta if zeta is not None else 'free'}_delta={delta:g}_lambda={reg_weight:g}"
        key = tuple(spec.to_dict().items())
        if key not in self._problems:
            try:
                self._problems[key] = generate_problem(spec)
            except IntermittentSGDError as e:
                e.message = f"{label}: {e.message}"
                e.args = (e.message,)
                raise
            summary = _problem_summary(self._problems[key])
            summary["label"] = label
            self.instances.append(summary)
        return label, self._problems[key]

    def _tuned(
        self, label: str, p: ProblemInstance, algorithms: Sequence[Algorithm]
    ) -> Dict[Algorithm, List[Trace]]:
        cfg = self.config
        grid = StepsizeGrid(
            algorithms=algorithms,
            stepsizes=cfg.stepsize_grid,
            seeds=cfg.seeds,
            tau=cfg.tau,
            rounds=cfg.rounds,
            sigma=cfg.sigma,
            metric=Metric.SCAFFOLD_PHASE2,
        )
        result = self.runner.run_grid(p, grid)
        self.tuning[label] = result.to_dict()
        chosen: Dict[Algorithm, List[Trace]] = {}
        for algorithm in algorithms:
            eta = result.chosen[algorithm]
            chosen[algorithm] = [grid.traces[(algorithm, eta, seed)] for seed in cfg.seeds]
            for seed, trace in zip(cfg.seeds, chosen[algorithm]):
                path = self.out / "traces" / label / _trace_name(algorithm, eta, seed)
                export_trace_csv(trace, path)
        return chosen

    @staticmethod
    def _mean_curve(traces: Sequence[Trace]) -> List[Tuple[int, float]]:
        curves = [running_metric_curve(trace, Metric.SCAFFOLD_PHASE2) for trace in traces]
        mean = []
        for index, (protocol_round, _) in enumerate(curves[0]):
            total = 0.0
            for curve in curves:
                total += curve[index][1]
            mean.append((protocol_round, total / len(curves)))
        return mean

    def comparison(
        self, algorithm: Algorithm, deltas: Sequence[float], zeta: Optional[float]
    ) -> None:
        cfg = self.config
        for delta in deltas:
            label, p = self._problem(zeta, delta, cfg.reg_weight)
            chosen = self._tuned(label, p, [Algorithm.MBSGD, algorithm])
            for alg in (Algorithm.MBSGD, algorithm):
                for protocol_round, value in self._mean_curve(chosen[alg]):
                    self.points.append(FigurePoint(alg, "delta", delta, protocol_round, value))
        self._plots.append(("curves.svg", curves_from_points(self.points), {}))

    def _sweep(
        self,
        algorithm: Algorithm,
        parameter: str,
        values: Sequence[float],
        checkpoint: int,
        settings: Callable[[float], Tuple[Optional[float], float, float]],
    ) -> None:
        swept: List[FigurePoint] = []
        for value in values:
            zeta, delta, reg_weight = settings(value)
            label, p = self._problem(zeta, delta, reg_weight)
            traces = self._tuned(label, p, [algorithm])[algorithm]
            metric = dict(self._mean_curve(traces))[checkpoint]
            swept.append(FigurePoint(algorithm, parameter, value, checkpoint, metric))
        self.points.extend(swept)
        xs = [point.value for point in swept]
        ys = [point.metric for point in swept]
        slope = least_squares_slope(xs, ys)
        intercept = sum(ys) / len(ys) - slope * sum(xs) / len(xs)
        curves = [
            Curve(label=f"{algorithm.value}, round {checkpoint}", xs=xs, ys=ys),
            Curve(label="least-squares fit", xs=xs, ys=[intercept + slope * x for x in xs]),
        ]
        options = {"xlabel": parameter, "log_y": False}
        self._plots.append((f"sweep_{parameter}.svg", curves, options))

    def localsgd_sweeps(self) -> None:
        cfg = self.config
        late = cfg.rounds
        self._sweep(
            Algorithm.LOCALSGD,
            "zeta",
            cfg.zeta_sweep,
            late,
            lambda v: (v, cfg.base_delta, cfg.reg_weight),
        )
        self._sweep(
            Algorithm.LOCALSGD,
            "delta",
            cfg.delta_sweep,
            late,
            lambda v: (cfg.base_zeta, v, cfg.reg_weight),
        )
        self._sweep(
            Algorithm.LOCALSGD,
            "reg_weight",
            cfg.reg_sweep,
            late,
            lambda v: (cfg.base_zeta, cfg.base_delta, v),
        )

    def scaffold_sweeps(self) -> None:
        cfg = self.config
        early = cfg.early_round
        self._sweep(
            Algorithm.SCAFFOLD,
            "delta",
            cfg.scaffold_delta_sweep,
            early,
            lambda v: (None, v, cfg.reg_weight),
        )
        self._sweep(
            Algorithm.SCAFFOLD,
            "reg_weight",
            cfg.reg_sweep,
            early,
            lambda v: (None, cfg.scaffold_base_delta, v),
        )

    def write(self, name: FigureName) -> List[Path]:
        artifacts = [write_figure_data(self.points, self.out / FIGURE_DATA)]
        for filename, curves, options in self._plots:
            artifacts.append(
                render_plot_svg(curves, self.out / filename, title=name.value, **options)
            )
        return artifacts


def _metric_at(
    points: Sequence[FigurePoint], algorithm: Algorithm, protocol_round: int
) -> List[Tuple[float, float]]:
    selected = [
        (point.value, point.metric)
        for point in points
        if point.algorithm == algorithm and point.round == protocol_round
    ]
    return sorted(selected)


def _increasing(values: Sequence[float]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


def _within_spread(values: Sequence[float], spread: float) -> bool:
    mean = sum(values) / len(values)
    return all(abs(v - mean) <= spread * mean for v in values)


def judge(
    name: Union[FigureName, str], points: Sequence[FigurePoint], config: FigureConfig
) -> FigureReport:
    """Evaluate a figure's qualitative verdict from its data points."""
    name = parse_enum(FigureName, name, "figure")
    checks: Dict[str, Any] = {}
    passed = True

    if name in (FigureName.FIG1_LEFT, FigureName.FIG1_RIGHT):
        if name == FigureName.FIG1_LEFT:
            algorithm, checkpoint = Algorithm.LOCALSGD, config.rounds
        else:
            algorithm, checkpoint = Algorithm.SCAFFOLD, config.early_round
        ordered = _metric_at(points, algorithm, checkpoint)
        baseline = _metric_at(points, Algorithm.MBSGD, config.rounds)
        increasing = _increasing([metric for _, metric in ordered])
        stable = _within_spread([metric for _, metric in baseline], config.mbsgd_spread)
        checks[f"{algorithm.value}_round_{checkpoint}"] = {f"{v:g}": m for v, m in ordered}
        checks[f"{algorithm.value}_increasing_in_delta"] = increasing
        checks[f"mbsgd_round_{config.rounds}"] = {f"{v:g}": m for v, m in baseline}
        checks["mbsgd_within_spread"] = stable
        passed = increasing and stable and len(ordered) > 1 and len(baseline) > 0
    else:
        algorithm = Algorithm.LOCALSGD if name == FigureName.FIG2 else Algorithm.SCAFFOLD
        parameters = ("zeta", "delta", "reg_weight") if name == FigureName.FIG2 else (
            "delta",
            "reg_weight",
        )
        for parameter in parameters:
            swept = sorted(
                (point.value, point.metric)
                for point in points
                if point.algorithm == algorithm and point.parameter == parameter
            )
            if len(swept) < 2:
                checks[f"{parameter}_slope"] = None
                passed = False
                continue
            slope = least_squares_slope([v for v, _ in swept], [m for _, m in swept])
            checks[f"{parameter}_slope"] = slope
            passed = passed and slope > 0

    return FigureReport(name=name, passed=passed, checks=checks)


def evaluate_verdict(
    name: Union[FigureName, str],
    output_dir: Union[str, Path],
    config: Optional[FigureConfig] = None,
) -> FigureReport:
    """Recompute a figure's verdict from the data persisted under ``output_dir/<name>``.

    The figure configuration is read back from the persisted summary unless given.
    """
    name = parse_enum(FigureName, name, "figure")
    folder = Path(output_dir) / name.value
    if config is None:
        summary = read_json(folder / FIGURE_SUMMARY)
        config = FigureConfig.from_dict(summary["config"])
    report = judge(name, read_figure_data(folder / FIGURE_DATA), config)
    report.artifacts = [str(folder / FIGURE_DATA)]
    return report


__all__ = [
    "ProblemSource",
    "FIGURE_DATA",
    "FIGURE_SUMMARY",
    "resolve_problem",
    "protocol_rounds_to_run",
    "StepsizeGrid",
    "ExperimentRunner",
    "judge",
    "evaluate_verdict",
]
