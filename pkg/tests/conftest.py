"""Shared fixtures: hand-built instances and small generated problems."""

import numpy as np
import pytest

from intermittent_sgd import GenerationSpec, ProblemInstance, build_problem, generate_problem

SMALL_SPEC = GenerationSpec(
    dimension=20,
    num_workers=4,
    seed=5,
    target_zeta=0.2,
    target_delta=0.05,
    reg_weight=0.01,
)


@pytest.fixture
def scalar_problem() -> ProblemInstance:
    """d=1, n=1, one unit row with target 0: f(x) = h(x), i.e. x^2/2 for |x| <= 1."""
    return build_problem([np.array([[1.0]])], [np.array([0.0])])


@pytest.fixture
def shifted_scalar_problem() -> ProblemInstance:
    """f(x) = h(x - 0.5); quadratic with L = 1 on [-0.5, 1.5]."""
    return build_problem([np.array([[1.0]])], [np.array([0.5])])


@pytest.fixture
def split_quadratic_problem() -> ProblemInstance:
    """Two workers with Hessians diag(1, 0) and diag(0, 1) near the origin."""
    return build_problem(
        [np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])],
        [np.zeros(2), np.zeros(2)],
    )


@pytest.fixture
def opposing_quadratic_problem() -> ProblemInstance:
    """Two one-dimensional workers ½(x - c_i)^2 with c = (1, -1), quadratic at x = 0."""
    return build_problem(
        [np.array([[1.0]]), np.array([[1.0]])],
        [np.array([1.0]), np.array([-1.0])],
    )


@pytest.fixture(scope="session")
def small_problem() -> ProblemInstance:
    """A calibrated d=10, n=4 instance with a non-zero regularizer."""
    return generate_problem(SMALL_SPEC)


@pytest.fixture(scope="session")
def homogeneous_problem() -> ProblemInstance:
    """Identical workers: zero data noise, zero anchor spread, no regularizer."""
    return generate_problem(
        GenerationSpec(
            dimension=6,
            num_workers=3,
            seed=9,
            target_zeta=0.0,
            target_delta=0.0,
            reg_weight=0.0,
        )
    )


@pytest.fixture
def rng() -> np.random.Generator:
    """Deterministic generator for test inputs."""
    return np.random.default_rng(12345)
