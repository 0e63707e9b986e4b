"""Sampled estimators of the assumption constants of a problem instance.

Every supremum-type constant is estimated as a running maximum over a
deterministic point sampler. Spectral quantities use power iteration
started from the previous point's vector plus a fixed generic vector.
Adding sample points never changes the estimates at earlier points.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .problem import global_grad, global_value, worker_grads, worker_hessians
from .types import ConditioningReport, OracleConfig, ProblemInstance, SamplerConfig
from .utils import SAMPLER_STREAM, box_muller_normals, counter_stream, ordered_mean

logger = logging.getLogger(__name__)

POWER_MAX_ITER = 100
POWER_TOL = 1e-8
FSTAR_MAX_STEPS = 100_000
FSTAR_GRAD_TOL = 1e-20


@dataclass
class PowerIterationResult:
    """Outcome of a power iteration.

    Attributes:
        value: Largest ``||B v||`` seen over unit vectors v
        vector: The unit vector attaining ``value``
        iterations: Number of matrix-vector products
        converged: Whether the relative change fell below the tolerance
    """

    value: float
    vector: np.ndarray
    iterations: int
    converged: bool


def power_iteration(
    matvec: Callable[[np.ndarray], np.ndarray],
    start: np.ndarray,
    max_iter: int = POWER_MAX_ITER,
    tol: float = POWER_TOL,
) -> PowerIterationResult:
    """Estimate the dominant absolute eigenvalue of a symmetric operator.

    For symmetric B the sequence ``||B v_k||`` is non-decreasing, so the
    returned value never drops below ``||B start|| / ||start||``.
    """
    norm = float(np.linalg.norm(start))
    vector = start / norm if norm > 0 else np.full(start.shape, 1.0 / math.sqrt(start.size))
    best_value, best_vector = 0.0, vector
    previous = 0.0
    for iteration in range(1, max_iter + 1):
        image = matvec(vector)
        value = float(np.linalg.norm(image))
        if value >= best_value:
            best_value, best_vector = value, vector
        if value == 0.0:
            return PowerIterationResult(0.0, vector, iteration, True)
        if abs(value - previous) <= tol * value:
            return PowerIterationResult(best_value, best_vector, iteration, True)
        previous = value
        vector = image / value
    return PowerIterationResult(best_value, best_vector, max_iter, False)


class PointSampler:
    """Deterministic sample points and nearby pairs.

    Point k is drawn from its own counter stream: even k around the origin,
    odd k around the anchor of worker ``(k // 2) mod n``. Pair k joins point
    k with a neighbour at a log-uniform separation in
    ``[min_separation, max_separation]``.
    """

    def __init__(
        self,
        config: Optional[SamplerConfig] = None,
        fixed_points: Optional[np.ndarray] = None,
    ) -> None:
        self.config = config or SamplerConfig()
        self.config.validate()
        self._fixed = None if fixed_points is None else np.atleast_2d(
            np.asarray(fixed_points, dtype=np.float64)
        )

    @classmethod
    def fixed(cls, points: np.ndarray, config: Optional[SamplerConfig] = None) -> "PointSampler":
        """Sampler over an explicit list of points."""
        return cls(config=config, fixed_points=points)

    def points(self, p: ProblemInstance) -> np.ndarray:
        """Sample points, shape ``(S, d)``."""
        if self._fixed is not None:
            return self._fixed
        cfg = self.config
        scale = 1.0 / math.sqrt(p.dimension)
        points = np.empty((cfg.num_points, p.dimension))
        for k in range(cfg.num_points):
            stream = counter_stream(cfg.seed, SAMPLER_STREAM, k, 0)
            direction = box_muller_normals(stream, p.dimension) * scale
            if k % 2 == 0:
                points[k] = cfg.origin_radius * direction
            else:
                anchor = p.anchors[(k // 2) % p.num_workers]
                points[k] = anchor + cfg.anchor_radius * direction
        return points

    def pairs(self, p: ProblemInstance) -> List[Tuple[np.ndarray, np.ndarray]]:
        """Point pairs with small separations."""
        cfg = self.config
        low, high = math.log(cfg.min_separation), math.log(cfg.max_separation)
        pairs = []
        for k, x in enumerate(self.points(p)):
            stream = counter_stream(cfg.seed, SAMPLER_STREAM, k, 1)
            raw = box_muller_normals(stream, x.size + 2)
            direction = raw[: x.size]
            direction /= np.linalg.norm(direction)
            fraction = 0.5 * (1.0 + math.erf(raw[-1] / math.sqrt(2.0)))
            separation = math.exp(low + fraction * (high - low))
            pairs.append((x, x + separation * direction))
        return pairs


def _default(sampler: Optional[PointSampler]) -> PointSampler:
    return sampler if sampler is not None else PointSampler()


def _start_vector(dimension: int) -> np.ndarray:
    return box_muller_normals(counter_stream(0, SAMPLER_STREAM, 2**63), dimension)


def _restart(previous: np.ndarray, fixed: np.ndarray) -> np.ndarray:
    """Previous vector plus the fixed start, both at unit norm."""
    norm = float(np.linalg.norm(previous))
    if norm == 0:
        return fixed
    start = previous / norm + fixed / float(np.linalg.norm(fixed))
    return start if np.any(start) else fixed


def _replicate(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(x, (p.num_workers, p.dimension))


class _Flag:
    """Collects power-iteration convergence over one estimate."""

    def __init__(self, name: str) -> None:
        self.name = name
        self.approximate = False

    def note(self, result: PowerIterationResult) -> PowerIterationResult:
        if not result.converged:
            self.approximate = True
        return result

    def report(self, level: int = logging.WARNING) -> None:
        if self.approximate:
            logger.log(
                level, "%s estimate is approximate: power iteration did not converge", self.name
            )


def _spectral_norm_sweep(p: ProblemInstance, sampler: PointSampler) -> Tuple[float, bool]:
    flag = _Flag("L")
    fixed = _start_vector(p.dimension)
    starts = [fixed] * p.num_workers
    best = 0.0
    for x in sampler.points(p):
        hessians = worker_hessians(p, _replicate(p, x))
        for i in range(p.num_workers):
            result = flag.note(power_iteration(hessians[i].__matmul__, starts[i]))
            starts[i] = _restart(result.vector, fixed)
            best = max(best, result.value)
    flag.report()
    return best, flag.approximate


def estimate_L(p: ProblemInstance, sampler: Optional[PointSampler] = None) -> float:
    """Largest sampled spectral norm of any local Hessian."""
    return _spectral_norm_sweep(p, _default(sampler))[0]


def _gradient_spread(p: ProblemInstance, sampler: PointSampler) -> Tuple[float, float]:
    mean_sq, max_sq = 0.0, 0.0
    for x in sampler.points(p):
        grads = worker_grads(p, _replicate(p, x))
        deviations = grads - ordered_mean(grads)
        per_worker = np.sum(deviations * deviations, axis=1)
        mean_sq = max(mean_sq, float(np.mean(per_worker)))
        max_sq = max(max_sq, float(np.max(per_worker)))
    return math.sqrt(mean_sq), math.sqrt(max_sq)


def estimate_zeta(p: ProblemInstance, sampler: Optional[PointSampler] = None) -> float:
    """Sampled gradient similarity: root of the max over points of the mean deviation."""
    return _gradient_spread(p, _default(sampler))[0]


def estimate_zeta_bar(p: ProblemInstance, sampler: Optional[PointSampler] = None) -> float:
    """Sampled uniform gradient similarity: root of the max over points and workers."""
    return _gradient_spread(p, _default(sampler))[1]


def _hessian_similarity(
    p: ProblemInstance, sampler: PointSampler, uniform: bool, level: int = logging.WARNING
) -> Tuple[float, float, bool]:
    """Return ``(delta, delta_bar, approximate)``; delta_bar is 0 unless ``uniform``."""
    flag = _Flag("delta")
    fixed = _start_vector(p.dimension)
    start = fixed
    mean_sq, bar_sq = 0.0, 0.0
    for x in sampler.points(p):
        hessians = worker_hessians(p, _replicate(p, x))
        deviations = hessians - ordered_mean(hessians)
        squares = np.matmul(deviations, deviations)
        averaged = ordered_mean(squares)
        result = flag.note(power_iteration(averaged.__matmul__, start))
        start = _restart(result.vector, fixed)
        mean_sq = max(mean_sq, result.value)
        if uniform:
            for square in squares:
                worker = flag.note(power_iteration(square.__matmul__, start))
                bar_sq = max(bar_sq, worker.value)

    fd_mean, fd_bar = 0.0, 0.0
    for x, y in sampler.pairs(p):
        dx = worker_grads(p, _replicate(p, x))
        dy = worker_grads(p, _replicate(p, y))
        change = (dx - ordered_mean(dx)) - (dy - ordered_mean(dy))
        per_worker = np.sum(change * change, axis=1)
        distance = float(np.linalg.norm(x - y))
        fd_mean = max(fd_mean, math.sqrt(float(np.mean(per_worker))) / distance)
        fd_bar = max(fd_bar, math.sqrt(float(np.max(per_worker))) / distance)

    flag.report(level)
    delta = max(math.sqrt(mean_sq), fd_mean)
    delta_bar = max(math.sqrt(bar_sq), fd_bar) if uniform else 0.0
    return delta, delta_bar, flag.approximate


def estimate_delta(
    p: ProblemInstance, sampler: Optional[PointSampler] = None, quiet: bool = False
) -> float:
    """Sampled Hessian similarity.

    The larger of the curvature form (largest eigenvalue of the averaged
    squared Hessian deviation) and the finite-difference ratio over pairs.
    With ``quiet`` an approximate estimate is logged at DEBUG instead of WARNING.
    """
    level = logging.DEBUG if quiet else logging.WARNING
    return _hessian_similarity(p, _default(sampler), uniform=False, level=level)[0]


def estimate_delta_bar(p: ProblemInstance, sampler: Optional[PointSampler] = None) -> float:
    """Sampled uniform Hessian similarity (max over workers)."""
    return _hessian_similarity(p, _default(sampler), uniform=True)[1]


def _weak_convexity(
    p: ProblemInstance, sampler: PointSampler, shift: float
) -> Tuple[float, bool]:
    flag = _Flag("rho")
    fixed = _start_vector(p.dimension)
    starts = [fixed] * p.num_workers
    identity = np.eye(p.dimension)
    rho = 0.0
    for x in sampler.points(p):
        hessians = worker_hessians(p, _replicate(p, x))
        for i in range(p.num_workers):
            shifted = shift * identity - hessians[i]
            result = flag.note(power_iteration(shifted.__matmul__, starts[i]))
            starts[i] = _restart(result.vector, fixed)
            rho = max(rho, result.value - shift)
    flag.report()
    return rho, flag.approximate


def estimate_rho(p: ProblemInstance, sampler: Optional[PointSampler] = None) -> float:
    """Sampled weak-convexity constant, ``max(0, -min eigenvalue)`` of local Hessians.

    The smallest eigenvalue comes from power iteration on ``L I - H`` with
    L the sampled smoothness; the result is capped at that L.
    """
    sampler = _default(sampler)
    L = estimate_L(p, sampler)
    return min(_weak_convexity(p, sampler, L)[0], L)


def _hessian_lipschitz(p: ProblemInstance, sampler: PointSampler) -> Tuple[float, bool]:
    flag = _Flag("M")
    fixed = _start_vector(p.dimension)
    start = fixed
    best = 0.0
    for x, y in sampler.pairs(p):
        hx = ordered_mean(worker_hessians(p, _replicate(p, x)))
        hy = ordered_mean(worker_hessians(p, _replicate(p, y)))
        difference = hx - hy
        result = flag.note(power_iteration(difference.__matmul__, start))
        start = _restart(result.vector, fixed)
        best = max(best, result.value / float(np.linalg.norm(x - y)))
    flag.report()
    return best, flag.approximate


def estimate_M(p: ProblemInstance, sampler: Optional[PointSampler] = None) -> float:
    """Sampled Lipschitz constant of the global Hessian over nearby pairs."""
    return _hessian_lipschitz(p, _default(sampler))[0]


def approximate_fstar(
    p: ProblemInstance,
    x0: Optional[np.ndarray] = None,
    L: Optional[float] = None,
    max_steps: int = FSTAR_MAX_STEPS,
) -> float:
    """Best objective value reached by gradient descent from ``x0`` and every anchor.

    Uses stepsize ``0.5 / L`` (L estimated when not given) and stops a run
    once ``||grad f||^2`` falls below 1e-20.
    """
    if L is None:
        L = estimate_L(p)
    if L <= 0:
        # A flat loss: the only curvature left is the bounded regularizer.
        L = 1.0
    eta = 0.5 / L
    origin = np.zeros(p.dimension) if x0 is None else np.asarray(x0, dtype=np.float64)
    best = math.inf
    for start in [origin, *p.anchors]:
        x = np.array(start, dtype=np.float64)
        for _ in range(max_steps):
            grad = global_grad(p, x)
            if float(grad @ grad) < FSTAR_GRAD_TOL:
                break
            x = x - eta * grad
            if not np.all(np.isfinite(x)):
                logger.warning("Gradient descent diverged while approximating f*")
                break
        if np.all(np.isfinite(x)):
            best = min(best, global_value(p, x), global_value(p, start))
    return best


def estimate_Delta(
    p: ProblemInstance, x0: Optional[np.ndarray] = None, f_star: Optional[float] = None
) -> float:
    """Initial gap ``f(x0) - f*``, floored at 0."""
    origin = np.zeros(p.dimension) if x0 is None else np.asarray(x0, dtype=np.float64)
    if f_star is None:
        f_star = approximate_fstar(p, origin)
    return max(0.0, global_value(p, origin) - f_star)


def estimate_conditioning(
    p: ProblemInstance,
    sampler: Optional[PointSampler] = None,
    x0: Optional[np.ndarray] = None,
    oracle: Optional[OracleConfig] = None,
) -> ConditioningReport:
    """Estimate every assumption constant of ``p`` with one sampler.

    L is raised to the sampled ``|min eigenvalue|`` when that is larger, so the
    report always satisfies rho <= L.
    """
    sampler = _default(sampler)
    L, approx_L = _spectral_norm_sweep(p, sampler)
    rho, approx_rho = _weak_convexity(p, sampler, L)
    L = max(L, rho)
    zeta, zeta_bar = _gradient_spread(p, sampler)
    delta, delta_bar, approx_delta = _hessian_similarity(p, sampler, uniform=True)
    M, approx_M = _hessian_lipschitz(p, sampler)
    f_star = approximate_fstar(p, x0, L=L)
    Delta = estimate_Delta(p, x0, f_star=f_star)
    report = ConditioningReport(
        L=L,
        sigma=0.0 if oracle is None else oracle.effective_sigma,
        zeta=zeta,
        zeta_bar=zeta_bar,
        delta=delta,
        delta_bar=delta_bar,
        rho=rho,
        M=M,
        Delta=Delta,
        sample_points=len(sampler.points(p)),
        sample_radius=sampler.config.origin_radius,
        fstar_estimate=f_star,
        seed=sampler.config.seed,
        approximate=approx_L or approx_rho or approx_delta or approx_M,
    )
    logger.info("Conditioning report: %s", report.to_dict())
    return report


__all__ = [
    "POWER_MAX_ITER",
    "POWER_TOL",
    "PowerIterationResult",
    "power_iteration",
    "PointSampler",
    "estimate_L",
    "estimate_zeta",
    "estimate_zeta_bar",
    "estimate_delta",
    "estimate_delta_bar",
    "estimate_rho",
    "estimate_M",
    "approximate_fstar",
    "estimate_Delta",
    "estimate_conditioning",
]
