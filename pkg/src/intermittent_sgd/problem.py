"""Smoothed-Huber regression objectives and the calibrated problem generator.

Each worker i holds ``f_i(x) = (n/m) * sum_j h(A_i[j] . x - y_i[j]) + r(x)``
where h is the three-branch smoothed Huber loss and
``r(x) = lambda * sum_l x_l^2 / (1 + x_l^2)`` is a bounded non-convex
regularizer. The global objective is the uniform average of the f_i.
Generated instances weigh every row by 1 and put the spectrum of ``A^T A``
in ``[0, L]``; hand-built instances default to the ``n/m`` weight.

Worker indices are 0-based throughout the package.
"""

import logging
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CalibrationError, WorkerIndexError
from .types import ConditioningTargets, GenerationSpec, LocalObjective, ProblemInstance
from .utils import GENERATION_STREAM, counter_generator, ordered_mean

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Upper ends of the bisection brackets for the anchor spread and centre.
SPREAD_BRACKET = 10.0
CENTER_BRACKET = 100.0


def _like_input(u: ArrayLike, out: np.ndarray) -> ArrayLike:
    return float(out) if np.ndim(u) == 0 else out


def huber_value(u: ArrayLike) -> ArrayLike:
    """Smoothed Huber loss, elementwise.

    ``u^2/2`` for ``|u| <= 1``, ``-(|u|-1)^3/6 + u^2/2`` for ``1 < |u| <= 2``
    and ``(3/2)|u| - 7/6`` beyond.
    """
    u_arr = np.asarray(u, dtype=np.float64)
    a = np.abs(u_arr)
    quadratic = 0.5 * u_arr * u_arr
    cubic = -((a - 1.0) ** 3) / 6.0 + quadratic
    linear = 1.5 * a - 7.0 / 6.0
    out = np.where(a <= 1.0, quadratic, np.where(a <= 2.0, cubic, linear))
    return _like_input(u, out)


def huber_deriv(u: ArrayLike) -> ArrayLike:
    """First derivative of :func:`huber_value`, elementwise."""
    u_arr = np.asarray(u, dtype=np.float64)
    a = np.abs(u_arr)
    sign = np.sign(u_arr)
    cubic = sign * (-((a - 1.0) ** 2) / 2.0) + u_arr
    out = np.where(a <= 1.0, u_arr, np.where(a <= 2.0, cubic, 1.5 * sign))
    return _like_input(u, out)


def huber_second_deriv(u: ArrayLike) -> ArrayLike:
    """Second derivative of :func:`huber_value`, elementwise."""
    u_arr = np.asarray(u, dtype=np.float64)
    a = np.abs(u_arr)
    out = np.where(a <= 1.0, 1.0, np.where(a <= 2.0, 2.0 - a, 0.0))
    return _like_input(u, out)


def regularizer_value(x: np.ndarray, reg_weight: float) -> float:
    """``lambda * sum_l x_l^2 / (1 + x_l^2)``."""
    sq = np.square(np.asarray(x, dtype=np.float64))
    return float(reg_weight * np.sum(sq / (1.0 + sq)))


def regularizer_grad(x: np.ndarray, reg_weight: float) -> np.ndarray:
    """Gradient of :func:`regularizer_value`."""
    x = np.asarray(x, dtype=np.float64)
    return reg_weight * 2.0 * x / (1.0 + x * x) ** 2


def regularizer_hess_diag(x: np.ndarray, reg_weight: float) -> np.ndarray:
    """Diagonal of the (diagonal) Hessian of :func:`regularizer_value`."""
    sq = np.square(np.asarray(x, dtype=np.float64))
    return reg_weight * 2.0 * (1.0 - 3.0 * sq) / (1.0 + sq) ** 3


def _check_worker(p: ProblemInstance, i: int) -> LocalObjective:
    if not 0 <= i < p.num_workers:
        raise WorkerIndexError(
            f"Worker index {i} out of range for {p.num_workers} workers",
            index=i,
            num_workers=p.num_workers,
        )
    return p.locals[i]


def local_value(p: ProblemInstance, i: int, x: np.ndarray) -> float:
    """Value of worker ``i``'s objective at ``x``.

    Raises:
        WorkerIndexError: If ``i`` is not in ``[0, n)``
    """
    obj = _check_worker(p, i)
    residual = obj.data_matrix @ x - obj.targets
    loss = float(p.scale_rows[i] * np.sum(huber_value(residual)))
    return loss + regularizer_value(x, obj.reg_weight)


def local_grad(p: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    """Gradient of worker ``i``'s objective at ``x``.

    Raises:
        WorkerIndexError: If ``i`` is not in ``[0, n)``
    """
    obj = _check_worker(p, i)
    residual = obj.data_matrix @ x - obj.targets
    loss_grad = p.scale_rows[i] * (obj.data_matrix.T @ huber_deriv(residual))
    return loss_grad + regularizer_grad(x, obj.reg_weight)


def local_hess(p: ProblemInstance, i: int, x: np.ndarray) -> np.ndarray:
    """Dense Hessian of worker ``i``'s objective at ``x``.

    Raises:
        WorkerIndexError: If ``i`` is not in ``[0, n)``
    """
    obj = _check_worker(p, i)
    residual = obj.data_matrix @ x - obj.targets
    weighted = obj.data_matrix.T * huber_second_deriv(residual)
    hess = p.scale_rows[i] * (weighted @ obj.data_matrix)
    hess[np.diag_indices_from(hess)] += regularizer_hess_diag(x, obj.reg_weight)
    return hess


def _stacked_residuals(p: ProblemInstance, points: np.ndarray) -> np.ndarray:
    return np.einsum("nij,nj->ni", p.data, points) - p.target_stack


def worker_values(p: ProblemInstance, points: np.ndarray) -> np.ndarray:
    """Values ``f_i(points[i])`` for every worker, shape ``(n,)``."""
    residual = _stacked_residuals(p, points)
    loss = p.scale_rows * np.sum(huber_value(residual), axis=1)
    sq = points * points
    return loss + p.reg_weights * np.sum(sq / (1.0 + sq), axis=1)


def worker_grads(p: ProblemInstance, points: np.ndarray) -> np.ndarray:
    """Gradients ``grad f_i(points[i])`` for every worker, shape ``(n, d)``."""
    residual = _stacked_residuals(p, points)
    loss_grad = np.einsum("nji,nj->ni", p.data, huber_deriv(residual))
    reg_grad = 2.0 * points / (1.0 + points * points) ** 2
    return p.scale_rows[:, None] * loss_grad + p.reg_weights[:, None] * reg_grad


def worker_hessians(p: ProblemInstance, points: np.ndarray) -> np.ndarray:
    """Hessians of every worker at its own point, shape ``(n, d, d)``."""
    residual = _stacked_residuals(p, points)
    weighted = np.transpose(p.data, (0, 2, 1)) * huber_second_deriv(residual)[:, None, :]
    hess = p.scale_rows[:, None, None] * np.matmul(weighted, p.data)
    sq = points * points
    diag = p.reg_weights[:, None] * 2.0 * (1.0 - 3.0 * sq) / (1.0 + sq) ** 3
    rows, cols = np.diag_indices(p.dimension)
    hess[:, rows, cols] += diag
    return hess


def _replicate(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(x, dtype=np.float64), (p.num_workers, p.dimension))


def global_value(p: ProblemInstance, x: np.ndarray) -> float:
    """Global objective ``f(x) = (1/n) sum_i f_i(x)``."""
    values = worker_values(p, _replicate(p, x))
    total = 0.0
    for value in values:
        total += float(value)
    return total / p.num_workers


def global_grad(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Global gradient, the ordered mean of the local gradients at ``x``."""
    return ordered_mean(worker_grads(p, _replicate(p, x)))


def global_hess(p: ProblemInstance, x: np.ndarray) -> np.ndarray:
    """Global Hessian, the ordered mean of the local Hessians at ``x``."""
    hessians = worker_hessians(p, _replicate(p, x))
    total = hessians[0].copy()
    for hess in hessians[1:]:
        total += hess
    return total / p.num_workers


def build_problem(
    data_matrices: Sequence[np.ndarray],
    anchors: Sequence[np.ndarray],
    reg_weight: float = 0.0,
    seed: int = 0,
    targets: Optional[Sequence[np.ndarray]] = None,
) -> ProblemInstance:
    """Assemble an instance from explicit worker data.

    Targets default to ``A_i @ anchor_i``.
    """
    locals_ = []
    for idx, (matrix, anchor) in enumerate(zip(data_matrices, anchors)):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        anchor = np.asarray(anchor, dtype=np.float64)
        y = matrix @ anchor if targets is None else np.asarray(targets[idx], dtype=np.float64)
        locals_.append(
            LocalObjective(data_matrix=matrix, targets=y, reg_weight=reg_weight, anchor=anchor)
        )
    dimension = locals_[0].dimension
    return ProblemInstance(
        dimension=dimension, num_workers=len(locals_), locals=tuple(locals_), seed=seed
    )


def _orthogonal_from_qr(matrix: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(matrix)
    # Fix the sign ambiguity so the draw is reproducible.
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def _centred_directions(rng: np.random.Generator, count: int, dimension: int) -> np.ndarray:
    directions = rng.standard_normal((count, dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    directions -= directions.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum(directions * directions, axis=1)))
    if rms > 0:
        directions /= rms
    return directions


class _Ingredients:
    """Random draws of one generation, reused across calibration steps."""

    def __init__(self, spec: GenerationSpec) -> None:
        d, n = spec.dimension, spec.num_workers
        rng = counter_generator(spec.seed, GENERATION_STREAM)
        # Unit row weight: residuals at the sample points stay in the quadratic branch.
        eigenvalues = np.linspace(0.0, spec.target_L, d)
        rotation = _orthogonal_from_qr(rng.standard_normal((d, d)))
        self.base = np.sqrt(eigenvalues)[:, None] * rotation.T
        noise = rng.standard_normal((n, d, d))
        noise -= noise.mean(axis=0)
        self.spread = _centred_directions(rng, n, d)
        center = rng.standard_normal(d)
        self.center = center / np.linalg.norm(center)
        if spec.target_Delta is not None:
            noise = self._orthogonal_to_center(noise)
        self.noise = noise
        self.spec = spec

    def _orthogonal_to_center(self, noise: np.ndarray) -> np.ndarray:
        # Keep A_i c = A c and A_i^T A c = A^T A c for every worker.
        image = self.base @ self.center
        image_norm = np.linalg.norm(image)
        right = np.eye(self.center.size) - np.outer(self.center, self.center)
        if image_norm > 0:
            unit = image / image_norm
            left = np.eye(unit.size) - np.outer(unit, unit)
        else:
            left = np.eye(self.center.size)
        return np.matmul(np.matmul(left, noise), right)

    def assemble(
        self, noise_scale: float, anchor_scale: float, center_scale: float
    ) -> ProblemInstance:
        spec = self.spec
        anchors = center_scale * self.center + anchor_scale * self.spread
        locals_ = []
        for i in range(spec.num_workers):
            matrix = self.base + noise_scale * self.noise[i]
            locals_.append(
                LocalObjective(
                    data_matrix=matrix,
                    targets=matrix @ anchors[i],
                    reg_weight=spec.reg_weight,
                    anchor=anchors[i],
                )
            )
        return ProblemInstance(
            dimension=spec.dimension,
            num_workers=spec.num_workers,
            locals=tuple(locals_),
            seed=spec.seed,
            targets=ConditioningTargets(
                L=spec.target_L,
                zeta=spec.target_zeta,
                delta=spec.target_delta,
                Delta=spec.target_Delta,
            ),
            noise_scale=noise_scale,
            anchor_scale=anchor_scale,
            center_scale=center_scale,
            scale_rows=np.ones(spec.num_workers),
        )

    def initial_gap(self, instance: ProblemInstance, center_scale: float) -> float:
        origin = np.zeros(self.spec.dimension)
        center = center_scale * self.center
        return global_value(instance, origin) - global_value(instance, center)


def _bisect(
    quantity: str,
    measure: Callable[[float], float],
    target: float,
    upper: float,
    tolerance: float,
    max_iters: int,
) -> Tuple[float, float]:
    """Find a knob in ``[0, upper]`` whose measured value is within tolerance of target."""
    if target == 0:
        return 0.0, measure(0.0)

    band = tolerance * target
    low_value = measure(0.0)
    if abs(low_value - target) <= band:
        return 0.0, low_value
    if low_value > target:
        raise CalibrationError(
            f"Cannot reach {quantity}={target}: already {low_value:.6g} with the knob at 0",
            quantity=quantity,
            target=target,
            best_value=low_value,
            best_parameter=0.0,
        )
    high_value = measure(upper)
    if abs(high_value - target) <= band:
        return upper, high_value
    if high_value < target:
        raise CalibrationError(
            f"Cannot reach {quantity}={target}: bracket [0, {upper:.6g}] tops out at "
            f"{high_value:.6g}",
            quantity=quantity,
            target=target,
            best_value=high_value,
            best_parameter=upper,
        )

    logger.info("Calibrating %s to %.6g on bracket [0, %.6g]", quantity, target, upper)
    low, high = 0.0, upper
    best_knob, best_value = (0.0, low_value)
    if abs(high_value - target) < abs(low_value - target):
        best_knob, best_value = upper, high_value
    for step in range(max_iters):
        knob = 0.5 * (low + high)
        value = measure(knob)
        logger.debug("%s step %d: knob=%.6g value=%.6g", quantity, step, knob, value)
        if abs(value - target) < abs(best_value - target):
            best_knob, best_value = knob, value
        if abs(value - target) <= band:
            return knob, value
        if value < target:
            low = knob
        else:
            high = knob

    raise CalibrationError(
        f"Calibration of {quantity} did not converge in {max_iters} steps "
        f"(best {best_value:.6g} for target {target:.6g})",
        quantity=quantity,
        target=target,
        best_value=best_value,
        best_parameter=best_knob,
    )


def _off_target(spec: GenerationSpec, achieved: Dict[str, float]) -> List[str]:
    """Quantities with a non-zero target whose measured value is outside tolerance."""
    off = []
    for quantity, target in (
        ("Delta", spec.target_Delta),
        ("delta", spec.target_delta),
        ("zeta", spec.target_zeta),
    ):
        # A zero target pins its knob at 0; nothing is left to tune.
        if target is None or target == 0:
            continue
        if abs(achieved[quantity] - target) > spec.calibration_tolerance * target:
            off.append(quantity)
    return off


def generate_problem(spec: GenerationSpec) -> ProblemInstance:
    """Generate an instance whose measured conditioning matches the spec.

    Each calibration round bisects the common centre against the initial
    gap (when ``target_Delta`` is set), then the data-noise scale against the
    Hessian similarity, then the anchor spread against the gradient
    similarity, each with the other knobs at their latest values. Rounds
    repeat until all three measurements on the final instance are within
    ``calibration_tolerance`` of their targets.

    Raises:
        ConfigurationError: If the spec is invalid
        CalibrationError: If a bisection cannot reach its target, or the
            rounds run out with a quantity still outside tolerance
    """
    # Deferred: the estimators evaluate instances built by this module.
    from .conditioning import estimate_delta, estimate_zeta

    spec.validate()
    parts = _Ingredients(spec)
    tol, iters = spec.calibration_tolerance, spec.calibration_max_iters
    upper_noise = float(np.linalg.norm(parts.base, 2))

    noise_scale = anchor_scale = center_scale = 0.0
    achieved: Dict[str, float] = {}
    off: List[str] = []
    for round_index in range(1, iters + 1):
        if spec.target_Delta is not None:
            center_scale, _ = _bisect(
                "Delta",
                lambda kappa: parts.initial_gap(
                    parts.assemble(noise_scale, anchor_scale, kappa), kappa
                ),
                spec.target_Delta,
                CENTER_BRACKET,
                tol,
                iters,
            )

        noise_scale, _ = _bisect(
            "delta",
            lambda eps: estimate_delta(parts.assemble(eps, anchor_scale, center_scale), quiet=True),
            spec.target_delta,
            upper_noise,
            tol,
            iters,
        )

        if spec.target_zeta is not None:
            anchor_scale, _ = _bisect(
                "zeta",
                lambda s: estimate_zeta(parts.assemble(noise_scale, s, center_scale)),
                spec.target_zeta,
                SPREAD_BRACKET,
                tol,
                iters,
            )

        instance = parts.assemble(noise_scale, anchor_scale, center_scale)
        achieved = {
            "delta": estimate_delta(instance),
            "zeta": estimate_zeta(instance),
        }
        if spec.target_Delta is not None:
            achieved["Delta"] = parts.initial_gap(instance, center_scale)
        off = _off_target(spec, achieved)
        if not off:
            break
        logger.info(
            "Calibration round %d left %s outside tolerance: %s",
            round_index,
            ", ".join(off),
            achieved,
        )
    else:
        quantity = off[0]
        target = getattr(spec, f"target_{quantity}")
        knob = {"Delta": center_scale, "delta": noise_scale, "zeta": anchor_scale}[quantity]
        raise CalibrationError(
            f"Calibration of {quantity} did not settle in {iters} rounds "
            f"(measured {achieved[quantity]:.6g} for target {target:.6g})",
            quantity=quantity,
            target=target,
            best_value=achieved[quantity],
            best_parameter=knob,
        )

    instance = replace(instance, achieved=achieved)
    logger.info(
        "Generated problem d=%d n=%d seed=%d: eps=%.6g s=%.6g kappa=%.6g achieved=%s",
        spec.dimension,
        spec.num_workers,
        spec.seed,
        noise_scale,
        anchor_scale,
        center_scale,
        achieved,
    )
    return instance


# Export all public functions
__all__ = [
    "huber_value",
    "huber_deriv",
    "huber_second_deriv",
    "regularizer_value",
    "regularizer_grad",
    "regularizer_hess_diag",
    "local_value",
    "local_grad",
    "local_hess",
    "worker_values",
    "worker_grads",
    "worker_hessians",
    "global_value",
    "global_grad",
    "global_hess",
    "build_problem",
    "generate_problem",
]
