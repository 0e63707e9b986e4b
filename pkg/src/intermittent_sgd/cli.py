"""Command-line interface: ``intermittent-sgd <subcommand> ...``.

Exit codes: 0 on success, 1 on usage or validation errors, 2 on runtime
failures and failed verdicts.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, NoReturn, Optional, Sequence

from .algorithms import compute_metric, run_algorithm
from .conditioning import estimate_conditioning
from .errors import ConfigurationError, IntermittentSGDError, MissingParameterError
from .harness import ExperimentRunner
from .persistence import export_trace_csv, load_problem, read_json, save_problem, write_json
from .problem import generate_problem
from .theory import (
    STEPSIZE_KINDS,
    asymptotic_rate,
    rate_bound,
    stepsize_terms,
    theoretical_stepsize,
    verify_lemmas,
)
from .types import (
    Algorithm,
    ExperimentSpec,
    FigureConfig,
    FigureName,
    GenerationSpec,
    Metric,
    OracleConfig,
    RateKind,
    RateParams,
    RunConfig,
    TuningProgress,
    parse_enum,
)
from .utils import json_safe

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILURE = 2

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """Parser that reports usage errors to the caller instead of exiting with 2."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)


def _json_object(path: str) -> Dict[str, Any]:
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must contain a JSON object", field="spec")
    return data


def _echo(data: Any) -> None:
    print(json.dumps(json_safe(data), indent=2, sort_keys=True))


def _cmd_generate(args: argparse.Namespace) -> int:
    spec = GenerationSpec.from_dict(_json_object(args.spec))
    p = generate_problem(spec)
    save_problem(p, args.out)
    _echo({"bundle": args.out, "achieved": p.achieved})
    return EXIT_OK


def _cmd_estimate(args: argparse.Namespace) -> int:
    p = load_problem(args.problem)
    report = estimate_conditioning(p, oracle=OracleConfig(sigma=args.sigma))
    write_json(report.to_dict(), args.out)
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    p = load_problem(args.problem)
    cfg = RunConfig(
        algorithm=parse_enum(Algorithm, args.algo, "algorithm"),
        eta=args.eta,
        tau=args.tau,
        rounds=args.rounds,
        oracle=OracleConfig(sigma=args.sigma, seed=args.seed),
        record_every=args.record_every,
    )
    trace = run_algorithm(p, cfg)
    path = export_trace_csv(trace, Path(args.out) / "trace.csv")
    scaffold = cfg.algorithm == Algorithm.SCAFFOLD
    metric = Metric.SCAFFOLD_PHASE2 if scaffold else Metric.AVG_GRAD_NORM_SQ
    _echo(
        {
            "trace": str(path),
            "diverged": trace.diverged,
            "metric": {metric.value: compute_metric(trace, metric)},
        }
    )
    return EXIT_OK


def _progress(progress: TuningProgress) -> None:
    logger.info(
        "[%d/%d] %s eta=%g seed=%d",
        progress.completed_runs,
        progress.total_runs,
        progress.algorithm.value,
        progress.stepsize,
        progress.seed,
    )


def _cmd_tune(args: argparse.Namespace) -> int:
    spec = ExperimentSpec.from_dict(_json_object(args.spec))
    with ExperimentRunner(max_workers=args.workers, on_progress=_progress) as runner:
        result = runner.tune(spec, output_dir=args.out)
    _echo({"chosen": {a.value: eta for a, eta in result.chosen.items()}})
    return EXIT_OK


def _cmd_reproduce(args: argparse.Namespace) -> int:
    config = FigureConfig.from_dict(_json_object(args.config)) if args.config else None
    with ExperimentRunner(max_workers=args.workers) as runner:
        report = runner.reproduce_figure(args.figure, args.out, config)
    _echo({"figure": report.name.value, "passed": report.passed, "checks": report.checks})
    return EXIT_OK if report.passed else EXIT_FAILURE


def _cmd_verify_lemmas(args: argparse.Namespace) -> int:
    reports = verify_lemmas(draws=args.draws, seed=args.seed)
    summary = [report.to_dict() for report in reports]
    if args.out:
        write_json(summary, args.out)
    _echo(summary)
    return EXIT_OK if all(report.violations == 0 for report in reports) else EXIT_FAILURE


def _rate_params(raw: str) -> RateParams:
    text = raw.strip()
    if text.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"--params is not valid JSON: {e}", field="params")
    else:
        data = _json_object(text)
    return RateParams.from_dict(data)


def _cmd_rate(args: argparse.Namespace) -> int:
    kind = parse_enum(RateKind, args.kind, "kind")
    params = _rate_params(args.params)
    output: Dict[str, Any] = {"rate_bound": rate_bound(kind, params).to_dict()}
    try:
        output["asymptotic_rate"] = asymptotic_rate(kind, params)
    except (ConfigurationError, MissingParameterError):
        pass
    if kind in STEPSIZE_KINDS:
        T = args.iterations if args.iterations is not None else params.tau * params.R
        output["stepsize_terms"] = stepsize_terms(kind, params, T)
        output["theoretical_stepsize"] = theoretical_stepsize(kind, params, T)
    _echo(output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with every subcommand."""
    parser = _ArgumentParser(
        prog="intermittent-sgd",
        description="Simulate MbSGD, LocalSGD and SCAFFOLD under intermittent communication.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging verbosity",
    )
    sub = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)
    sub.required = True

    generate = sub.add_parser("generate", help="Generate a calibrated problem bundle")
    generate.add_argument("--spec", required=True, help="Generation spec JSON file")
    generate.add_argument("--out", required=True, help="Bundle path to write")
    generate.set_defaults(handler=_cmd_generate)

    estimate = sub.add_parser("estimate", help="Estimate the conditioning constants of a bundle")
    estimate.add_argument("--problem", required=True, help="Problem bundle")
    estimate.add_argument("--out", required=True, help="Report JSON path")
    estimate.add_argument("--sigma", type=float, default=0.0, help="Oracle noise level to report")
    estimate.set_defaults(handler=_cmd_estimate)

    run = sub.add_parser("run", help="Run one algorithm and export its trace")
    run.add_argument("--problem", required=True, help="Problem bundle")
    run.add_argument("--algo", required=True, choices=[a.value for a in Algorithm])
    run.add_argument("--eta", type=float, required=True, help="Stepsize")
    run.add_argument("--tau", type=int, default=50, help="Communication interval")
    run.add_argument("--rounds", type=int, default=50, help="Outer rounds")
    run.add_argument("--sigma", type=float, default=0.01, help="Oracle noise level")
    run.add_argument("--seed", type=int, default=111, help="Oracle seed")
    run.add_argument("--record-every", type=int, default=1, help="Record stride")
    run.add_argument("--out", required=True, help="Output directory")
    run.set_defaults(handler=_cmd_run)

    tune = sub.add_parser("tune", help="Tune stepsizes over a grid")
    tune.add_argument("--spec", required=True, help="Experiment spec JSON file")
    tune.add_argument("--out", required=True, help="Output directory")
    tune.add_argument("--workers", type=int, default=1, help="Concurrent grid runs")
    tune.set_defaults(handler=_cmd_tune)

    reproduce = sub.add_parser("reproduce", help="Reproduce a figure and its verdict")
    reproduce.add_argument("--figure", required=True, choices=[f.value for f in FigureName])
    reproduce.add_argument("--out", required=True, help="Output directory")
    reproduce.add_argument("--config", default=None, help="Figure config JSON overriding defaults")
    reproduce.add_argument("--workers", type=int, default=1, help="Concurrent grid runs")
    reproduce.set_defaults(handler=_cmd_reproduce)

    lemmas = sub.add_parser("verify-lemmas", help="Run the randomized inequality checks")
    lemmas.add_argument("--draws", type=int, default=1000, help="Random draws per inequality")
    lemmas.add_argument("--seed", type=int, default=0, help="Draw seed")
    lemmas.add_argument("--out", default=None, help="Report JSON path")
    lemmas.set_defaults(handler=_cmd_verify_lemmas)

    rate = sub.add_parser("rate", help="Evaluate a rate bound and stepsize assignment")
    rate.add_argument("--kind", required=True, choices=[k.value for k in RateKind])
    rate.add_argument("--params", required=True, help="Rate parameters as JSON text or file")
    rate.add_argument(
        "--iterations", type=int, default=None, help="Total iterations T (default tau * R)"
    )
    rate.set_defaults(handler=_cmd_rate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(None if argv is None else list(argv))
    except _UsageError:
        return EXIT_INVALID
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    try:
        code: int = args.handler(args)
        return code
    except ConfigurationError as e:
        logger.error("Invalid configuration: %s", e.message)
        return EXIT_INVALID
    except IntermittentSGDError as e:
        logger.error("%s: %s", type(e).__name__, e.message)
        return EXIT_FAILURE


__all__ = ["EXIT_OK", "EXIT_INVALID", "EXIT_FAILURE", "build_parser", "main"]
