"""Rate-bound calculators, theoretical stepsizes and numerical inequality checks.

Rate bounds evaluate every displayed term with leading constant 1; they
compare orders of magnitude and certify nothing.
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .conditioning import PointSampler, estimate_conditioning
from .errors import (
    ConfigurationError,
    DegenerateParametersError,
    MissingParameterError,
    PreconditionError,
)
from .problem import generate_problem, global_grad, local_grad, worker_grads
from .types import (
    CheckResult,
    ConditioningReport,
    GenerationSpec,
    LemmaSuiteReport,
    ProblemInstance,
    RateBound,
    RateKind,
    RateParams,
    SamplerConfig,
    parse_enum,
)
from .utils import LEMMA_STREAM, counter_generator, ordered_mean

logger = logging.getLogger(__name__)

# Relative and absolute tolerance of every inequality check.
CHECK_RTOL = 1e-9
CHECK_ATOL = 1e-12

# Factor applied to estimated constants before they enter an inequality.
INFLATION = 1.05

_NOISE_SYMBOLS = ("L", "Delta", "sigma")

_REQUIRED: Dict[RateKind, Tuple[str, ...]] = {
    RateKind.MBSGD: _NOISE_SYMBOLS,
    RateKind.SCAFFOLD_CLASSIC: _NOISE_SYMBOLS,
    RateKind.LOCALSGD_CLASSIC: _NOISE_SYMBOLS + ("zeta",),
    RateKind.LOCALSGD_CONVEX_PREV: ("L", "D", "sigma", "zeta_bar"),
    RateKind.LOCALSGD_CONVEX: ("L", "D", "sigma", "zeta"),
    RateKind.SCAFFOLD_QUADRATIC: _NOISE_SYMBOLS + ("delta_bar", "rho"),
    RateKind.LOCALSGD_FASTER: _NOISE_SYMBOLS + ("zeta", "rho"),
    RateKind.LOCALSGD_HS: _NOISE_SYMBOLS + ("zeta", "delta_bar", "M"),
    RateKind.SCAFFOLD_SPEEDUP: _NOISE_SYMBOLS + ("delta", "rho"),
    RateKind.SCAFFOLD_LIPSCHITZ: _NOISE_SYMBOLS + ("delta", "delta_bar", "rho"),
}

STEPSIZE_KINDS = (
    RateKind.LOCALSGD_FASTER,
    RateKind.LOCALSGD_CONVEX,
    RateKind.LOCALSGD_HS,
    RateKind.SCAFFOLD_SPEEDUP,
    RateKind.SCAFFOLD_LIPSCHITZ,
)


def _symbols(kind: RateKind, params: RateParams) -> Dict[str, float]:
    params.validate()
    missing = [name for name in _REQUIRED[kind] if getattr(params, name) is None]
    if missing:
        raise MissingParameterError(
            f"Rate kind '{kind.value}' requires {', '.join(missing)}",
            kind=kind.value,
            missing=missing,
        )
    values = {name: float(getattr(params, name)) for name in _REQUIRED[kind]}
    values.update(n=float(params.n), tau=float(params.tau), R=float(params.R))
    return values


def _ratio(numerator: float, denominator: float) -> float:
    """``numerator / denominator`` with a zero denominator read as +inf."""
    if denominator == 0:
        return math.inf
    return numerator / denominator


def _noise_term(s: Dict[str, float]) -> float:
    return math.sqrt(s["L"] * s["Delta"] * s["sigma"] ** 2 / (s["n"] * s["tau"] * s["R"]))


def _local_noise_term(s: Dict[str, float], scale: float) -> float:
    return (scale * s["Delta"] * s["sigma"]) ** (2 / 3) / (s["tau"] ** (1 / 3) * s["R"] ** (2 / 3))


def _convex_terms(s: Dict[str, float], heterogeneity_sq: float) -> Dict[str, float]:
    L, D, sigma, tau, R, n = s["L"], s["D"], s["sigma"], s["tau"], s["R"], s["n"]
    return {
        "optimization": L * D**2 / (tau * R),
        "noise": sigma * D / math.sqrt(n * tau * R),
        "heterogeneity": (L * heterogeneity_sq * D**4 / R**2) ** (1 / 3),
        "local_noise": (L * sigma**2 * D**4 / (tau * R**2)) ** (1 / 3),
    }


def _terms(kind: RateKind, s: Dict[str, float]) -> Dict[str, float]:
    L, Delta, tau, R = s.get("L", 0.0), s.get("Delta", 0.0), s["tau"], s["R"]
    if kind in (RateKind.MBSGD, RateKind.SCAFFOLD_CLASSIC):
        return {"optimization": L * Delta / R, "noise": _noise_term(s)}
    if kind in (RateKind.LOCALSGD_CLASSIC, RateKind.LOCALSGD_FASTER):
        leading = L if kind is RateKind.LOCALSGD_CLASSIC else L / tau + s["rho"]
        return {
            "optimization": leading * Delta / R,
            "noise": _noise_term(s),
            "heterogeneity": (L * Delta * s["zeta"] / R) ** (2 / 3),
            "local_noise": _local_noise_term(s, L),
        }
    if kind is RateKind.LOCALSGD_CONVEX_PREV:
        return _convex_terms(s, s["zeta_bar"] ** 2)
    if kind is RateKind.LOCALSGD_CONVEX:
        return _convex_terms(s, s["zeta"] ** 2)
    if kind is RateKind.SCAFFOLD_QUADRATIC:
        return {
            "optimization": (L / tau + s["delta_bar"] + s["rho"]) * Delta / R,
            "noise": _noise_term(s),
        }
    if kind is RateKind.LOCALSGD_HS:
        zeta = s["zeta"]
        return {
            "optimization": L * Delta / R,
            "noise": _noise_term(s),
            "heterogeneity": (s["delta_bar"] * Delta * zeta / R) ** (2 / 3),
            "local_noise": _local_noise_term(s, L),
            "higher_order": (s["M"] ** 2 * Delta**4 * zeta**4 / R**4) ** (1 / 5),
        }
    if kind is RateKind.SCAFFOLD_SPEEDUP:
        return {
            "optimization": (L / tau + math.sqrt(L * s["delta"]) + s["rho"]) * Delta / R,
            "noise": _noise_term(s),
            "local_noise": _local_noise_term(s, L),
        }
    # SCAFFOLD_LIPSCHITZ
    similarity = math.sqrt(s["delta_bar"] * s["delta"])
    return {
        "optimization": (L / tau + similarity + s["rho"]) * Delta / R,
        "noise": _noise_term(s),
        "local_noise": _local_noise_term(s, s["delta_bar"]),
    }


def rate_bound(kind: RateKind, params: RateParams) -> RateBound:
    """Evaluate a convergence-rate formula term by term.

    Raises:
        ConfigurationError: If ``params`` is out of range
        MissingParameterError: If a symbol the kind needs is None
    """
    kind = parse_enum(RateKind, kind, "kind")
    terms = _terms(kind, _symbols(kind, params))
    total = 0.0
    for value in terms.values():
        total += value
    return RateBound(kind=kind, terms=terms, total=total)


def asymptotic_rate(kind: RateKind, params: RateParams) -> float:
    """Simplified rate at ``L = Delta = sigma = 1`` and infinite tau.

    Only ``R`` and the similarity symbols of ``params`` are read.

    Raises:
        ConfigurationError: If the kind has no simplified form
        MissingParameterError: If a similarity symbol the form needs is None
    """
    kind = parse_enum(RateKind, kind, "kind")
    R = float(params.R)

    def need(*names: str) -> List[float]:
        missing = [name for name in names if getattr(params, name) is None]
        if missing:
            raise MissingParameterError(
                f"Asymptotic rate '{kind.value}' requires {', '.join(missing)}",
                kind=kind.value,
                missing=missing,
            )
        return [float(getattr(params, name)) for name in names]

    if kind in (RateKind.MBSGD, RateKind.SCAFFOLD_CLASSIC):
        return 1.0 / R
    if kind is RateKind.LOCALSGD_CLASSIC:
        (zeta,) = need("zeta")
        return 1.0 / R + (zeta / R) ** (2 / 3)
    if kind is RateKind.LOCALSGD_FASTER:
        zeta, rho = need("zeta", "rho")
        return rho / R + (zeta / R) ** (2 / 3)
    if kind is RateKind.LOCALSGD_HS:
        zeta, delta_bar, M = need("zeta", "delta_bar", "M")
        return 1.0 / R + (delta_bar * zeta / R) ** (2 / 3) + (M**2 * zeta**4 / R**4) ** (1 / 5)
    if kind is RateKind.SCAFFOLD_SPEEDUP:
        delta, rho = need("delta", "rho")
        return (math.sqrt(delta) + rho) / R
    if kind is RateKind.SCAFFOLD_LIPSCHITZ:
        delta, delta_bar, rho = need("delta", "delta_bar", "rho")
        return (math.sqrt(delta_bar * delta) + rho) / R
    if kind is RateKind.SCAFFOLD_QUADRATIC:
        delta_bar, rho = need("delta_bar", "rho")
        return (delta_bar + rho) / R
    raise ConfigurationError(
        f"Rate kind '{kind.value}' has no asymptotic simplification", field="kind", value=kind
    )


def _weak_convexity_term(s: Dict[str, float]) -> float:
    denominator = 6 * s["rho"] * (s["tau"] - 1)
    if denominator == 0:
        return math.inf
    return (1 - s["rho"] / s["L"]) / denominator


def stepsize_terms(kind: RateKind, params: RateParams, T: int) -> Dict[str, float]:
    """Every term of a theorem's stepsize assignment; zero denominators give +inf.

    Raises:
        ConfigurationError: If the kind has no assignment or T < 1
        MissingParameterError: If a symbol the assignment needs is None
    """
    kind = parse_enum(RateKind, kind, "kind")
    if kind not in STEPSIZE_KINDS:
        raise ConfigurationError(
            f"Rate kind '{kind.value}' has no stepsize assignment", field="kind", value=kind
        )
    if T < 1:
        raise ConfigurationError("T must be a positive integer", field="T", value=T)
    s = _symbols(kind, params)
    L, n, tau, sigma_sq = s["L"], s["n"], s["tau"], s["sigma"] ** 2
    gap = tau - 1

    if kind is RateKind.LOCALSGD_CONVEX:
        D_sq, zeta_sq = s["D"] ** 2, s["zeta"] ** 2
        return {
            "smoothness": _ratio(1.0, 2 * L),
            "noise": math.sqrt(_ratio(n * D_sq, 3 * sigma_sq * T)),
            "heterogeneity": _ratio(D_sq, 3 * L * gap**2 * zeta_sq * T) ** (1 / 3),
            "local_noise": _ratio(D_sq, 3 * L * gap * sigma_sq * T) ** (1 / 3),
        }

    Delta = s["Delta"]
    if kind is RateKind.LOCALSGD_FASTER:
        return {
            "smoothness": _ratio(1.0, L),
            "weak_convexity": _weak_convexity_term(s),
            "noise": math.sqrt(_ratio(2 * Delta * n, L * sigma_sq * T)),
            "heterogeneity": _ratio(4 * Delta, 27 * L**2 * gap**2 * s["zeta"] ** 2 * T)
            ** (1 / 3),
            "local_noise": _ratio(2 * Delta, 9 * L**2 * gap * sigma_sq * T) ** (1 / 3),
        }
    if kind is RateKind.LOCALSGD_HS:
        zeta, delta_bar, M = s["zeta"], s["delta_bar"], s["M"]
        return {
            "smoothness": _ratio(1.0, L),
            "drift": _ratio(1.0, 3 * L * gap),
            "noise": math.sqrt(_ratio(2 * Delta * n, L * sigma_sq * T)),
            "heterogeneity": _ratio(Delta, 54 * delta_bar**2 * gap**2 * zeta**2 * T) ** (1 / 3),
            "local_noise": _ratio(Delta, 9 * L**2 * gap * sigma_sq * T) ** (1 / 3),
            "higher_order": _ratio(
                8 * Delta, 81 * M**2 * gap**3 * (2 * tau - 1) * zeta**4 * T
            )
            ** (1 / 5),
        }
    if kind is RateKind.SCAFFOLD_SPEEDUP:
        return {
            "smoothness": _ratio(1.0, 2 * L),
            "weak_convexity": _weak_convexity_term(s),
            "similarity": _ratio(1.0, 4 * math.sqrt(L * s["delta"]) * tau),
            "noise": math.sqrt(_ratio(Delta * n, 2 * L * sigma_sq * T)),
            "local_noise": _ratio(2 * Delta, 3 * L**2 * gap * sigma_sq * T) ** (1 / 3),
        }
    # SCAFFOLD_LIPSCHITZ
    delta_bar = s["delta_bar"]
    return {
        "smoothness": _ratio(1.0, 2 * L),
        "weak_convexity": _weak_convexity_term(s),
        "similarity": _ratio(1.0, 6 * math.sqrt(delta_bar * s["delta"]) * tau),
        "noise": math.sqrt(_ratio(2 * Delta * n, L * sigma_sq * T)),
        "local_noise": _ratio(Delta, 12 * delta_bar**2 * gap * sigma_sq * T) ** (1 / 3),
    }


def theoretical_stepsize(kind: RateKind, params: RateParams, T: int) -> float:
    """Minimum over the finite terms of the theorem's stepsize assignment.

    Raises:
        DegenerateParametersError: If every term is infinite or the minimum is not positive
    """
    kind = parse_enum(RateKind, kind, "kind")
    terms = stepsize_terms(kind, params, T)
    finite = [value for value in terms.values() if math.isfinite(value)]
    if not finite:
        raise DegenerateParametersError(
            f"Every stepsize term of '{kind.value}' is infinite", kind=kind.value
        )
    eta = min(finite)
    if eta <= 0:
        raise DegenerateParametersError(
            f"Stepsize assignment of '{kind.value}' is not positive ({eta})", kind=kind.value
        )
    return eta


def _check(lemma: str, lhs: float, rhs: float, **details: float) -> CheckResult:
    tolerance = CHECK_ATOL + CHECK_RTOL * max(abs(lhs), abs(rhs))
    slack = rhs - lhs
    return CheckResult(
        lemma=lemma, lhs=lhs, rhs=rhs, holds=slack >= -tolerance, slack=slack, details=details
    )


def _spread(points: np.ndarray, reference: np.ndarray) -> float:
    offsets = points - reference
    return float(np.mean(np.sum(offsets * offsets, axis=1)))


def check_variance_identity(points: Sequence[np.ndarray], y: np.ndarray) -> CheckResult:
    """Check ``(1/n) sum ||x_i - mean||^2 <= (1/n) sum ||x_i - y||^2``."""
    stacked = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if stacked.shape[0] == 0:
        raise PreconditionError("At least one point is required", lemma="variance_trick")
    centre = ordered_mean(stacked)
    return _check(
        "variance_trick",
        _spread(stacked, centre),
        _spread(stacked, np.asarray(y, dtype=np.float64)),
    )


def _step_difference(
    p: ProblemInstance, i: int, x: np.ndarray, y: np.ndarray, eta: float
) -> Tuple[float, float, float]:
    gx, gy = local_grad(p, i, x), local_grad(p, i, y)
    moved = (x - eta * gx) - (y - eta * gy)
    distance = x - y
    return float(moved @ moved), float(distance @ distance), float(np.sum((gx - gy) ** 2))


def check_weak_convexity_contraction(
    p: ProblemInstance,
    i: int,
    x: np.ndarray,
    y: np.ndarray,
    eta: float,
    L: float,
    rho: float,
) -> CheckResult:
    """Check the gradient-step contraction of a weakly convex smooth function.

    Raises:
        PreconditionError: If ``rho >= L`` with rho > 0, or eta is outside ``(0, 2/(L - rho)]``
    """
    lemma = "weak_convexity_contraction"
    if rho > 0 and rho >= L:
        raise PreconditionError(f"Requires rho < L, got rho={rho}, L={L}", lemma=lemma)
    limit = _ratio(2.0, L - rho)
    if not 0 < eta <= limit:
        raise PreconditionError(f"Requires 0 < eta <= {limit}, got {eta}", lemma=lemma)
    moved, distance, _ = _step_difference(p, i, x, y, eta)
    factor = 1.0 + (2 * L * rho * eta / (L - rho) if rho > 0 else 0.0)
    return _check(lemma, moved, factor * distance, distance_sq=distance)


def check_smooth_contraction(
    p: ProblemInstance, i: int, x: np.ndarray, y: np.ndarray, eta: float, L: float
) -> CheckResult:
    """Check ``||step(x) - step(y)||^2 <= (1 + L eta)^2 ||x - y||^2``.

    Raises:
        PreconditionError: If eta is not positive
    """
    if eta <= 0:
        raise PreconditionError(f"Requires eta > 0, got {eta}", lemma="smooth_contraction")
    moved, distance, _ = _step_difference(p, i, x, y, eta)
    return _check("smooth_contraction", moved, (1 + L * eta) ** 2 * distance)


def check_q_bounds(
    p: ProblemInstance, points: np.ndarray, L: float, delta_bar: float, M: float
) -> CheckResult:
    """Check the plain and refined bounds on the gradient discrepancy Q.

    ``Q = ||(1/n) sum grad f_i(x_i) - grad f(mean)||^2`` must stay below both
    ``L^2 Xi`` and ``8 delta_bar^2 Xi + (M^2/2) Xi^2``. ``rhs`` is the smaller
    bound; ``details`` carries both bounds and their slacks.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.shape != (p.num_workers, p.dimension):
        raise PreconditionError(
            f"Expected one point per worker, shape ({p.num_workers}, {p.dimension})",
            lemma="q_bounds",
        )
    centre = ordered_mean(points)
    gap = ordered_mean(worker_grads(p, points)) - global_grad(p, centre)
    q = float(gap @ gap)
    xi = _spread(points, centre)
    plain = L**2 * xi
    refined = 8 * delta_bar**2 * xi + 0.5 * M**2 * xi**2
    plain_check = _check("q_bound_plain", q, plain)
    refined_check = _check("q_bound_refined", q, refined)
    result = _check(
        "q_bounds",
        q,
        min(plain, refined),
        Q=q,
        Xi=xi,
        plain_bound=plain,
        refined_bound=refined,
        plain_slack=plain_check.slack,
        refined_slack=refined_check.slack,
    )
    result.holds = plain_check.holds and refined_check.holds
    return result


def check_smooth_weakly_convex_inequality(
    p: ProblemInstance, i: int, x: np.ndarray, y: np.ndarray, L: float, rho: float
) -> CheckResult:
    """Check ``||g_x - g_y||^2 - rho L ||x - y||^2 <= (L - rho) <x - y, g_x - g_y>``."""
    gx, gy = local_grad(p, i, x), local_grad(p, i, y)
    distance = x - y
    change = gx - gy
    lhs = float(change @ change) - rho * L * float(distance @ distance)
    rhs = (L - rho) * float(distance @ change)
    return _check("smooth_weakly_convex", lhs, rhs)


LEMMA_PROBLEM = GenerationSpec(
    dimension=20,
    num_workers=5,
    seed=4242,
    target_L=1.0,
    target_zeta=0.2,
    target_delta=0.05,
    reg_weight=0.01,
)
LEMMA_SAMPLER = SamplerConfig(num_points=256, seed=7)

LEMMAS = (
    "variance_trick",
    "weak_convexity_contraction",
    "smooth_contraction",
    "q_bound_plain",
    "q_bound_refined",
    "smooth_weakly_convex",
)


def inflate(report: ConditioningReport, factor: float = INFLATION) -> ConditioningReport:
    """Scale the estimated constants of a report by ``factor``."""
    values = report.to_dict()
    for name in ("L", "zeta", "zeta_bar", "delta", "delta_bar", "rho", "M"):
        values[name] = factor * values[name]
    return ConditioningReport(**values)


class _Draws:
    """Random inputs of one suite draw, from its own counter stream."""

    def __init__(self, p: ProblemInstance, seed: int, index: int) -> None:
        self.p = p
        self.rng = counter_generator(seed, LEMMA_STREAM, index)
        self.scale = 1.0 / math.sqrt(p.dimension)

    def point(self) -> np.ndarray:
        worker = int(self.rng.integers(-1, self.p.num_workers))
        if worker < 0:
            return self.rng.standard_normal(self.p.dimension) * self.scale
        anchor = self.p.anchors[worker]
        return anchor + 0.5 * self.rng.standard_normal(self.p.dimension) * self.scale

    def near(self, x: np.ndarray) -> np.ndarray:
        radius = 10.0 ** self.rng.uniform(-3.0, 0.0)
        return x + radius * self.rng.standard_normal(x.size) * self.scale

    def cloud(self) -> np.ndarray:
        centre = self.point()
        spread = self.rng.standard_normal((self.p.num_workers, self.p.dimension))
        return centre + 0.5 * self.scale * spread

    def worker(self) -> int:
        return int(self.rng.integers(0, self.p.num_workers))


def verify_lemmas(
    draws: int = 1000,
    seed: int = 0,
    problem: Optional[ProblemInstance] = None,
    constants: Optional[ConditioningReport] = None,
) -> List[LemmaSuiteReport]:
    """Run every inequality check on ``draws`` random inputs.

    The instance defaults to a small generated problem; the constants default
    to its conditioning estimates inflated by 5%.
    """
    if draws < 1:
        raise ConfigurationError("draws must be positive", field="draws", value=draws)
    p = problem if problem is not None else generate_problem(LEMMA_PROBLEM)
    if constants is None:
        constants = inflate(estimate_conditioning(p, PointSampler(LEMMA_SAMPLER)))
    L, rho = constants.L, constants.rho
    eta_limit = 2.0 / (L - rho)
    logger.info("Verifying lemmas over %d draws with L=%.6g rho=%.6g", draws, L, rho)

    checks: Dict[str, Callable[[_Draws], CheckResult]] = {
        "variance_trick": lambda d: check_variance_identity(d.cloud(), d.point()),
        "weak_convexity_contraction": lambda d: _pair_check(
            d,
            lambda i, x, y: check_weak_convexity_contraction(
                p, i, x, y, eta_limit * (1.0 - d.rng.uniform()), L, rho
            ),
        ),
        "smooth_contraction": lambda d: _pair_check(
            d,
            lambda i, x, y: check_smooth_contraction(
                p, i, x, y, eta_limit * (1.0 - d.rng.uniform()), L
            ),
        ),
        "smooth_weakly_convex": lambda d: _pair_check(
            d, lambda i, x, y: check_smooth_weakly_convex_inequality(p, i, x, y, L, rho)
        ),
    }

    slacks: Dict[str, List[float]] = {name: [] for name in LEMMAS}
    violations: Dict[str, int] = {name: 0 for name in LEMMAS}
    for index in range(draws):
        for offset, (name, run) in enumerate(checks.items()):
            result = run(_Draws(p, seed, 8 * index + offset))
            slacks[name].append(result.slack)
            violations[name] += 0 if result.holds else 1
        cloud = _Draws(p, seed, 8 * index + 7).cloud()
        q = check_q_bounds(p, cloud, L, constants.delta_bar, constants.M)
        for name, key in (("q_bound_plain", "plain"), ("q_bound_refined", "refined")):
            bound = q.details[f"{key}_bound"]
            check = _check(name, q.lhs, bound)
            slacks[name].append(check.slack)
            violations[name] += 0 if check.holds else 1

    reports = [
        LemmaSuiteReport(
            lemma=name, draws=draws, violations=violations[name], worst_slack=min(slacks[name])
        )
        for name in LEMMAS
    ]
    for report in reports:
        if report.violations:
            logger.warning("%s violated on %d of %d draws", report.lemma, report.violations, draws)
    return reports


def _pair_check(
    draws: _Draws, run: Callable[[int, np.ndarray, np.ndarray], CheckResult]
) -> CheckResult:
    x = draws.point()
    return run(draws.worker(), x, draws.near(x))


__all__ = [
    "CHECK_RTOL",
    "CHECK_ATOL",
    "INFLATION",
    "STEPSIZE_KINDS",
    "rate_bound",
    "asymptotic_rate",
    "stepsize_terms",
    "theoretical_stepsize",
    "check_variance_identity",
    "check_weak_convexity_contraction",
    "check_smooth_contraction",
    "check_q_bounds",
    "check_smooth_weakly_convex_inequality",
    "LEMMA_PROBLEM",
    "LEMMA_SAMPLER",
    "LEMMAS",
    "inflate",
    "verify_lemmas",
]
