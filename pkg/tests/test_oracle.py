"""Tests for the stochastic gradient oracle."""

import numpy as np
import pytest

from intermittent_sgd import OracleConfig, QueryKey, local_grad, sample_gradient, sample_gradients
from intermittent_sgd.oracle import sample_noise


def test_zero_sigma_is_exact(small_problem, rng) -> None:
    """Test sigma = 0 returns the exact local gradient."""
    x = rng.standard_normal(small_problem.dimension)
    g = sample_gradient(small_problem, OracleConfig(sigma=0.0), QueryKey(worker=2, iteration=7), x)
    assert np.array_equal(g, local_grad(small_problem, 2, x))


def test_noise_kind_none_is_exact(small_problem, rng) -> None:
    """Test the noise-free law ignores sigma."""
    x = rng.standard_normal(small_problem.dimension)
    cfg = OracleConfig(sigma=3.0, noise_kind="none")  # type: ignore[arg-type]
    g = sample_gradient(small_problem, cfg, QueryKey(worker=0, iteration=0), x)
    assert np.array_equal(g, local_grad(small_problem, 0, x))


def test_draw_is_pure_function_of_key() -> None:
    """Test draws do not depend on the order in which keys are queried."""
    cfg = OracleConfig(sigma=1.0, seed=42)
    keys = [QueryKey(worker=w, iteration=t) for t in range(3) for w in range(2)]
    forward = [sample_noise(cfg, key, 4) for key in keys]
    backward = [sample_noise(cfg, key, 4) for key in reversed(keys)][::-1]
    for a, b in zip(forward, backward):
        assert np.array_equal(a, b)


def test_distinct_keys_and_seeds_differ() -> None:
    """Test worker, iteration, replica and seed all select different draws."""
    cfg = OracleConfig(sigma=1.0, seed=1)
    base = sample_noise(cfg, QueryKey(worker=0, iteration=0), 3)
    others = [
        sample_noise(cfg, QueryKey(worker=1, iteration=0), 3),
        sample_noise(cfg, QueryKey(worker=0, iteration=1), 3),
        sample_noise(cfg, QueryKey(worker=0, iteration=0, replica=1), 3),
        sample_noise(OracleConfig(sigma=1.0, seed=2), QueryKey(worker=0, iteration=0), 3),
    ]
    for other in others:
        assert not np.array_equal(base, other)


def test_noise_statistics() -> None:
    """Test the empirical mean is near zero and E||nu||^2 is near sigma^2."""
    sigma, d, draws = 0.7, 5, 20_000
    cfg = OracleConfig(sigma=sigma, seed=3)
    samples = np.stack(
        [sample_noise(cfg, QueryKey(worker=0, iteration=t), d) for t in range(draws)]
    )
    assert np.all(np.abs(samples.mean(axis=0)) < 0.02)
    mean_sq_norm = float(np.mean(np.sum(samples * samples, axis=1)))
    assert mean_sq_norm == pytest.approx(sigma**2, rel=0.03)


def test_batched_gradients_match_single_queries(small_problem, rng) -> None:
    """Test row i of the batch is the query for worker i at that iteration."""
    p = small_problem
    cfg = OracleConfig(sigma=0.5, seed=9)
    points = rng.standard_normal((p.num_workers, p.dimension))
    batch = sample_gradients(p, cfg, 11, points)
    for i in range(p.num_workers):
        single = sample_gradient(p, cfg, QueryKey(worker=i, iteration=11), points[i])
        assert np.allclose(batch[i], single, rtol=1e-12, atol=1e-12)
