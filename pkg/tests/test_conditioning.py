"""Tests for the conditioning estimators."""

import numpy as np
import pytest

from intermittent_sgd import (
    OracleConfig,
    PointSampler,
    SamplerConfig,
    approximate_fstar,
    build_problem,
    estimate_conditioning,
    estimate_Delta,
    estimate_delta,
    estimate_delta_bar,
    estimate_L,
    estimate_M,
    estimate_rho,
    estimate_zeta,
    estimate_zeta_bar,
)
from intermittent_sgd.conditioning import power_iteration


def test_power_iteration_dominant_value() -> None:
    """Test the dominant absolute eigenvalue of a symmetric matrix."""
    matrix = np.diag([3.0, -5.0, 1.0])
    result = power_iteration(matrix.__matmul__, np.ones(3))
    assert result.converged
    assert result.value == pytest.approx(5.0, rel=1e-6)


def test_power_iteration_zero_operator() -> None:
    """Test a zero operator returns zero immediately."""
    result = power_iteration(np.zeros((2, 2)).__matmul__, np.ones(2))
    assert result.value == 0.0
    assert result.converged


class TestPointSampler:
    """Tests for deterministic sample points."""

    def test_deterministic(self, small_problem) -> None:
        """Test the same sampler yields the same points and pairs."""
        first, second = PointSampler(), PointSampler()
        assert np.array_equal(first.points(small_problem), second.points(small_problem))
        for (a, b), (c, e) in zip(first.pairs(small_problem), second.pairs(small_problem)):
            assert np.array_equal(a, c)
            assert np.array_equal(b, e)

    def test_layout(self, small_problem) -> None:
        """Test even points surround the origin and odd points the anchors."""
        sampler = PointSampler(SamplerConfig(num_points=8, anchor_radius=1e-6))
        points = sampler.points(small_problem)

        assert points.shape == (8, small_problem.dimension)
        for k in (1, 3, 5, 7):
            anchor = small_problem.anchors[(k // 2) % small_problem.num_workers]
            assert np.linalg.norm(points[k] - anchor) < 1e-4

    def test_pair_separations(self, small_problem) -> None:
        """Test pair separations stay within the configured range."""
        config = SamplerConfig(num_points=16, min_separation=1e-3, max_separation=1e-1)
        for x, y in PointSampler(config).pairs(small_problem):
            assert 1e-3 <= np.linalg.norm(x - y) <= 1e-1 * (1 + 1e-12)

    def test_fixed_points(self, scalar_problem) -> None:
        """Test an explicit point list is used as given."""
        sampler = PointSampler.fixed(np.array([[0.5], [0.25]]))
        assert np.array_equal(sampler.points(scalar_problem), np.array([[0.5], [0.25]]))


class TestHandComputedConstants:
    """Instances whose constants are known in closed form."""

    def test_split_quadratic_hessian_similarity(self, split_quadratic_problem) -> None:
        """Test Hessians diag(1, 0) and diag(0, 1) give delta = delta_bar = 1/2."""
        sampler = PointSampler.fixed(np.array([[0.0, 0.0], [0.3, -0.2]]))
        p = split_quadratic_problem

        assert estimate_delta(p, sampler) == pytest.approx(0.5, abs=1e-9)
        assert estimate_delta_bar(p, sampler) == pytest.approx(0.5, abs=1e-9)

    def test_opposing_quadratic_gradient_similarity(self, opposing_quadratic_problem) -> None:
        """Test gradients -1 and +1 at the origin give zeta = zeta_bar = 1."""
        sampler = PointSampler.fixed(np.array([[0.0]]))
        p = opposing_quadratic_problem

        assert estimate_zeta(p, sampler) == pytest.approx(1.0)
        assert estimate_zeta_bar(p, sampler) == pytest.approx(1.0)

    def test_smoothness(self) -> None:
        """Test rows sqrt(2) e_1 and e_2 with weight 1/2 give L = 1."""
        p = build_problem([np.diag([np.sqrt(2.0), 1.0])], [np.zeros(2)])
        sampler = PointSampler.fixed(np.zeros((1, 2)))
        assert estimate_L(p, sampler) == pytest.approx(1.0, abs=1e-6)

    def test_smoothness_curvature_moves_to_orthogonal_direction(self) -> None:
        """Test L = 2 when the second point curves only along the first point's null space.

        At (0, 3) the Hessian is diag(1/2, 0); at (3, 0) it is diag(0, 2).
        """
        p = build_problem([np.diag([1.0, 2.0])], [np.zeros(2)])
        sampler = PointSampler.fixed(np.array([[0.0, 3.0], [3.0, 0.0]]))
        assert estimate_L(p, sampler) == pytest.approx(2.0, abs=1e-6)

    def test_hessian_similarity_moves_to_orthogonal_direction(self) -> None:
        """Test delta picks up a deviation along the first point's null space."""
        p = build_problem([np.diag([1.0, 2.0]), np.diag([2.0, 0.0])], [np.zeros(2)] * 2)
        # At (0, 3) the Hessians are diag(1/2, 0) and diag(2, 0); at (3, 0) they
        # are diag(0, 2) and 0, a deviation of 1 along e_2.
        sampler = PointSampler.fixed(np.array([[0.0, 3.0], [3.0, 0.0]]))
        assert estimate_delta(p, sampler) >= 1.0 - 1e-6

    def test_weak_convexity_of_regularizer(self) -> None:
        """Test a pure regularizer with weight 1 has rho = 1/2, reached at x = 1."""
        p = build_problem([np.array([[0.0]])], [np.array([0.0])], reg_weight=1.0)
        sampler = PointSampler.fixed(np.array([[0.0], [1.0]]))
        assert estimate_rho(p, sampler) == pytest.approx(0.5, abs=1e-9)

    def test_hessian_lipschitz_on_cubic_branch(self, scalar_problem) -> None:
        """Test h'' = 2 - |u| on the cubic branch gives M = 1."""
        sampler = PointSampler.fixed(np.array([[1.2], [1.5]]))
        assert estimate_M(scalar_problem, sampler) == pytest.approx(1.0, abs=1e-6)

    def test_fstar_and_gap(self, shifted_scalar_problem) -> None:
        """Test f* = 0 at x = 1/2 and the gap f(0) - f* = 1/8."""
        f_star = approximate_fstar(shifted_scalar_problem, L=1.0)
        assert f_star == pytest.approx(0.0, abs=1e-12)
        assert estimate_Delta(shifted_scalar_problem, f_star=f_star) == pytest.approx(0.125)


class TestConsistency:
    """Relations every sampled estimate satisfies."""

    def test_uniform_bounds_dominate(self, small_problem) -> None:
        """Test uniform similarities are at least the averaged ones."""
        sampler = PointSampler(SamplerConfig(num_points=12))
        p = small_problem

        assert estimate_zeta(p, sampler) <= estimate_zeta_bar(p, sampler)
        assert estimate_delta(p, sampler) <= estimate_delta_bar(p, sampler) * (1 + 1e-9)

    def test_more_points_never_lower(self, small_problem) -> None:
        """Test estimates over a point prefix never exceed the full estimate."""
        p = small_problem
        points = PointSampler(SamplerConfig(num_points=12)).points(p)
        prefix, full = PointSampler.fixed(points[:5]), PointSampler.fixed(points)

        assert estimate_zeta(p, prefix) <= estimate_zeta(p, full)
        assert estimate_L(p, prefix) <= estimate_L(p, full)

    def test_delta_at_most_L(self, small_problem) -> None:
        """Test the Hessian similarity never exceeds the smoothness."""
        sampler = PointSampler(SamplerConfig(num_points=12))
        assert estimate_delta(small_problem, sampler) <= estimate_L(small_problem, sampler) * (
            1 + 1e-6
        )

    def test_report(self, scalar_problem) -> None:
        """Test the full report of a one-worker quadratic."""
        report = estimate_conditioning(scalar_problem, oracle=OracleConfig(sigma=0.3))

        assert report.rho <= report.L
        assert report.L == pytest.approx(1.0, abs=1e-6)
        assert report.zeta == 0.0
        assert report.delta == 0.0
        assert report.sigma == 0.3
        assert report.Delta == pytest.approx(0.0, abs=1e-12)
        assert report.sample_points == SamplerConfig().num_points
        assert set(report.to_dict()) >= {"L", "zeta", "delta", "rho", "M", "Delta"}
