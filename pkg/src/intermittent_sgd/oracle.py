"""Stochastic first-order oracle with counter-based, order-independent noise."""

import math

import numpy as np

from .problem import local_grad, worker_grads
from .types import OracleConfig, ProblemInstance, QueryKey
from .utils import ORACLE_STREAM, box_muller_normals, counter_stream


def sample_noise(cfg: OracleConfig, key: QueryKey, dimension: int) -> np.ndarray:
    """Noise vector for one query.

    Isotropic Gaussian with per-coordinate standard deviation
    ``sigma / sqrt(d)``, so ``E||nu||^2 = sigma^2``. The draw is a pure
    function of ``(cfg.seed, key)``.
    """
    sigma = cfg.effective_sigma
    if sigma == 0.0:
        return np.zeros(dimension)
    stream = counter_stream(cfg.seed, ORACLE_STREAM, key.iteration, key.worker, key.replica)
    return (sigma / math.sqrt(dimension)) * box_muller_normals(stream, dimension)


def sample_gradient(
    p: ProblemInstance, cfg: OracleConfig, key: QueryKey, x: np.ndarray
) -> np.ndarray:
    """Unbiased stochastic gradient of worker ``key.worker`` at ``x``."""
    return local_grad(p, key.worker, x) + sample_noise(cfg, key, p.dimension)


def sample_gradients(
    p: ProblemInstance, cfg: OracleConfig, iteration: int, points: np.ndarray
) -> np.ndarray:
    """Stochastic gradients of every worker at its own point for one iteration.

    Row i equals the query ``QueryKey(worker=i, iteration=iteration)`` at
    ``points[i]``; the local gradients are evaluated as one batch.
    """
    grads = worker_grads(p, points)
    if cfg.effective_sigma == 0.0:
        return grads
    for worker in range(p.num_workers):
        key = QueryKey(worker=worker, iteration=iteration)
        grads[worker] += sample_noise(cfg, key, p.dimension)
    return grads


__all__ = ["sample_noise", "sample_gradient", "sample_gradients"]
