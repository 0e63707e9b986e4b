"""Tests for rate bounds, theoretical stepsizes and inequality checks."""

import math

import numpy as np
import pytest

from intermittent_sgd import (
    ConfigurationError,
    DegenerateParametersError,
    MissingParameterError,
    PreconditionError,
    RateKind,
    RateParams,
    asymptotic_rate,
    check_q_bounds,
    check_smooth_contraction,
    check_smooth_weakly_convex_inequality,
    check_variance_identity,
    check_weak_convexity_contraction,
    rate_bound,
    stepsize_terms,
    theoretical_stepsize,
    verify_lemmas,
)
from intermittent_sgd.theory import LEMMAS, STEPSIZE_KINDS

SYMBOLS = ("sigma", "zeta", "zeta_bar", "delta", "delta_bar", "rho", "M", "Delta", "D")

FULL_PARAMS = dict(
    L=1.0,
    Delta=1.0,
    sigma=0.5,
    zeta=0.2,
    zeta_bar=0.3,
    delta=0.1,
    delta_bar=0.2,
    rho=0.1,
    M=0.5,
    D=1.0,
    n=4,
    tau=5,
    R=20,
)


class TestRateBound:
    """Tests for term-by-term rate evaluation."""

    def test_mbsgd(self) -> None:
        """Test 1/100 + sqrt(1/100) = 0.11."""
        bound = rate_bound(RateKind.MBSGD, RateParams(L=1, Delta=1, sigma=1, n=1, tau=1, R=100))
        assert bound.total == pytest.approx(0.11)
        assert bound.terms == {"optimization": pytest.approx(0.01), "noise": pytest.approx(0.1)}

    def test_localsgd_faster_noiseless(self) -> None:
        """Test only the (L/tau + rho) Delta / R term survives without noise or heterogeneity."""
        params = RateParams(L=1, Delta=1, sigma=0, zeta=0, rho=0, tau=10, R=100)
        assert rate_bound(RateKind.LOCALSGD_FASTER, params).total == pytest.approx(0.001)

    def test_localsgd_faster_asymptotics(self) -> None:
        """Test a huge tau approaches rho/R + (zeta/R)^(2/3)."""
        params = RateParams(L=1, Delta=1, sigma=1, zeta=1.0, rho=0.5, tau=10**9, R=100)
        expected = 0.5 / 100 + (1.0 / 100) ** (2 / 3)
        assert rate_bound(RateKind.LOCALSGD_FASTER, params).total == pytest.approx(
            expected, rel=1e-2
        )
        assert asymptotic_rate(RateKind.LOCALSGD_FASTER, params) == pytest.approx(expected)

    def test_kind_from_string(self) -> None:
        """Test kinds may be named by their wire value."""
        params = RateParams(L=1, Delta=1, sigma=1, R=4)
        bound = rate_bound("scaffold_classic", params)  # type: ignore[arg-type]
        assert bound.kind is RateKind.SCAFFOLD_CLASSIC

    def test_missing_parameter(self) -> None:
        """Test the missing symbols are named."""
        with pytest.raises(MissingParameterError) as exc_info:
            rate_bound(RateKind.MBSGD, RateParams(L=1.0))
        assert exc_info.value.missing == ["Delta", "sigma"]

    def test_convex_kind_needs_distance(self) -> None:
        """Test convex kinds require D."""
        with pytest.raises(MissingParameterError):
            rate_bound(RateKind.LOCALSGD_CONVEX, RateParams(L=1, sigma=1, zeta=1))

    def test_invalid_parameters(self) -> None:
        """Test rho above L is rejected."""
        with pytest.raises(ConfigurationError):
            rate_bound(RateKind.LOCALSGD_FASTER, RateParams(**{**FULL_PARAMS, "rho": 2.0}))

    @pytest.mark.parametrize("kind", list(RateKind))
    def test_monotonicity(self, kind: RateKind, rng) -> None:
        """Test totals grow with every symbol and shrink with R."""
        for _ in range(20):
            base = dict(FULL_PARAMS)
            for name in SYMBOLS:
                base[name] = float(rng.uniform(0.01, 0.5))
            total = rate_bound(kind, RateParams(**base)).total
            for name in SYMBOLS:
                bigger = rate_bound(kind, RateParams(**{**base, name: base[name] * 1.5})).total
                assert bigger >= total * (1 - 1e-12)
            longer = rate_bound(kind, RateParams(**{**base, "R": base["R"] * 2})).total
            assert longer <= total * (1 + 1e-12)

    def test_localsgd_beats_mbsgd_at_low_heterogeneity(self) -> None:
        """Test LocalSGD's bound is smaller for small zeta and rho with huge tau."""
        R = 100
        params = RateParams(
            L=1, Delta=1, sigma=1, zeta=math.sqrt(0.1 / R), rho=0.1, tau=10**9, R=R
        )
        local = rate_bound(RateKind.LOCALSGD_FASTER, params).total
        assert local <= rate_bound(RateKind.MBSGD, params).total

    def test_scaffold_beats_mbsgd_at_small_similarity(self) -> None:
        """Test SCAFFOLD's bound is smaller for delta <= 1/100 and rho <= 1/10."""
        params = RateParams(L=1, Delta=1, sigma=1, delta=0.01, rho=0.1, tau=10**9, R=100)
        scaffold = rate_bound(RateKind.SCAFFOLD_SPEEDUP, params).total
        assert scaffold <= rate_bound(RateKind.MBSGD, params).total


class TestAsymptoticRate:
    """Tests for the simplified rates."""

    def test_scaffold_speedup(self) -> None:
        """Test (sqrt(delta) + rho) / R."""
        params = RateParams(delta=0.04, rho=0.1, R=10)
        assert asymptotic_rate(RateKind.SCAFFOLD_SPEEDUP, params) == pytest.approx(0.03)

    def test_mbsgd(self) -> None:
        """Test 1 / R."""
        assert asymptotic_rate(RateKind.MBSGD, RateParams(R=8)) == pytest.approx(0.125)

    def test_no_simplification(self) -> None:
        """Test convex kinds have no simplified form."""
        with pytest.raises(ConfigurationError):
            asymptotic_rate(RateKind.LOCALSGD_CONVEX, RateParams(R=8))


class TestTheoreticalStepsize:
    """Tests for the min-of-terms stepsize assignments."""

    def test_localsgd_faster_example(self) -> None:
        """Test the heterogeneity term (4/27000)^(1/3) is the binding one."""
        params = RateParams(L=1, Delta=1, n=10, sigma=1, zeta=1, rho=0, tau=2)
        terms = stepsize_terms(RateKind.LOCALSGD_FASTER, params, 1000)

        assert terms["smoothness"] == 1.0
        assert terms["weak_convexity"] == math.inf
        assert terms["noise"] == pytest.approx(math.sqrt(0.02))
        assert terms["local_noise"] == pytest.approx((2 / 9000) ** (1 / 3))
        eta = theoretical_stepsize(RateKind.LOCALSGD_FASTER, params, 1000)
        assert eta == pytest.approx((4 / 27000) ** (1 / 3))

    def test_reduces_to_one_over_L(self) -> None:
        """Test all data-dependent terms vanish without noise, heterogeneity or rho."""
        params = RateParams(L=2, Delta=1, n=10, sigma=0, zeta=0, rho=0, tau=5)
        assert theoretical_stepsize(RateKind.LOCALSGD_FASTER, params, 100) == pytest.approx(0.5)

    def test_scaffold_similarity_term(self) -> None:
        """Test the 1/(4 sqrt(L delta) tau) term."""
        params = RateParams(L=1, Delta=1, sigma=1, delta=0.04, rho=0.1, tau=5, n=2)
        terms = stepsize_terms(RateKind.SCAFFOLD_SPEEDUP, params, 100)
        assert terms["similarity"] == pytest.approx(1 / (4 * 0.2 * 5))

    @pytest.mark.parametrize("kind", STEPSIZE_KINDS)
    def test_at_most_every_term(self, kind: RateKind) -> None:
        """Test the chosen stepsize satisfies every finite constraint."""
        params = RateParams(**FULL_PARAMS)
        eta = theoretical_stepsize(kind, params, 200)
        assert eta > 0
        for value in stepsize_terms(kind, params, 200).values():
            assert eta <= value

    def test_degenerate(self) -> None:
        """Test an assignment with only infinite terms raises."""
        params = RateParams(L=0, Delta=1, sigma=0, zeta=0, rho=0, tau=2)
        with pytest.raises(DegenerateParametersError):
            theoretical_stepsize(RateKind.LOCALSGD_FASTER, params, 10)

    def test_kind_without_assignment(self) -> None:
        """Test lemma-only kinds have no stepsize assignment."""
        with pytest.raises(ConfigurationError):
            stepsize_terms(RateKind.MBSGD, RateParams(L=1, Delta=1, sigma=1), 10)

    def test_non_positive_horizon(self) -> None:
        """Test T must be positive."""
        with pytest.raises(ConfigurationError):
            stepsize_terms(RateKind.LOCALSGD_FASTER, RateParams(**FULL_PARAMS), 0)


class TestChecks:
    """Tests for the individual inequality checks."""

    def test_variance_identity(self) -> None:
        """Test lhs 1 and rhs 2 for points (0, 0), (2, 0) around the origin."""
        result = check_variance_identity([np.array([0.0, 0.0]), np.array([2.0, 0.0])], np.zeros(2))
        assert (result.lhs, result.rhs) == (1.0, 2.0)
        assert result.holds

    def test_variance_identity_at_mean(self) -> None:
        """Test equality when y is the mean."""
        points = [np.array([1.0, 3.0]), np.array([-1.0, 5.0]), np.array([3.0, 1.0])]
        result = check_variance_identity(points, np.array([1.0, 3.0]))
        assert result.holds
        assert result.slack == pytest.approx(0.0, abs=1e-12)

    def test_variance_identity_needs_points(self) -> None:
        """Test an empty point set is rejected."""
        with pytest.raises(PreconditionError):
            check_variance_identity(np.zeros((0, 2)), np.zeros(2))  # type: ignore[arg-type]

    def test_weak_convexity_contraction_cancels(self, scalar_problem) -> None:
        """Test a unit-Hessian quadratic with eta = 1 maps every point to the minimizer."""
        result = check_weak_convexity_contraction(
            scalar_problem, 0, np.array([0.4]), np.array([-0.3]), eta=1.0, L=1.0, rho=0.0
        )
        assert result.lhs == pytest.approx(0.0, abs=1e-30)
        assert result.rhs == pytest.approx(0.49)
        assert result.holds

    def test_weak_convexity_preconditions(self, scalar_problem) -> None:
        """Test rho >= L and eta beyond 2/(L - rho) are rejected."""
        x, y = np.array([0.1]), np.array([0.2])
        with pytest.raises(PreconditionError):
            check_weak_convexity_contraction(scalar_problem, 0, x, y, eta=0.1, L=1.0, rho=1.0)
        with pytest.raises(PreconditionError):
            check_weak_convexity_contraction(scalar_problem, 0, x, y, eta=2.5, L=1.0, rho=0.0)

    def test_smooth_contraction(self, scalar_problem) -> None:
        """Test x = y gives 0 <= 0 and eta must be positive."""
        x = np.array([0.7])
        result = check_smooth_contraction(scalar_problem, 0, x, x, eta=0.5, L=1.0)
        assert (result.lhs, result.rhs, result.holds) == (0.0, 0.0, True)
        with pytest.raises(PreconditionError):
            check_smooth_contraction(scalar_problem, 0, x, x, eta=0.0, L=1.0)

    def test_smooth_weakly_convex_saturates(self, scalar_problem) -> None:
        """Test a Hessian L * I with rho = 0 gives equality."""
        result = check_smooth_weakly_convex_inequality(
            scalar_problem, 0, np.array([0.5]), np.array([-0.25]), L=1.0, rho=0.0
        )
        assert result.lhs == pytest.approx(0.5625)
        assert result.rhs == pytest.approx(0.5625)
        assert result.holds

    def test_q_bounds_equal_points(self, small_problem) -> None:
        """Test identical points give Q = Xi = 0."""
        p = small_problem
        points = np.tile(np.linspace(-0.5, 0.5, p.dimension), (p.num_workers, 1))
        result = check_q_bounds(p, points, L=1.0, delta_bar=0.1, M=1.0)
        assert result.details["Q"] == pytest.approx(0.0, abs=1e-20)
        assert result.details["Xi"] == pytest.approx(0.0, abs=1e-20)
        assert result.holds

    def test_q_bounds_homogeneous_quadratic(self, homogeneous_problem, rng) -> None:
        """Test identical quadratic workers have Q = 0 for any points."""
        p = homogeneous_problem
        points = 0.01 * rng.standard_normal((p.num_workers, p.dimension))
        result = check_q_bounds(p, points, L=1.0, delta_bar=0.0, M=0.0)
        assert result.details["Xi"] > 0
        assert result.details["Q"] == pytest.approx(0.0, abs=1e-20)

    def test_q_bounds_shape(self, small_problem) -> None:
        """Test one point per worker is required."""
        with pytest.raises(PreconditionError):
            check_q_bounds(small_problem, np.zeros((1, small_problem.dimension)), 1.0, 0.1, 1.0)


class TestVerifyLemmas:
    """Tests for the randomized suites."""

    def test_report_layout(self, small_problem) -> None:
        """Test one report per inequality with the requested draw count."""
        reports = verify_lemmas(draws=25, seed=3, problem=small_problem)

        assert [r.lemma for r in reports] == list(LEMMAS)
        assert all(r.draws == 25 for r in reports)
        by_name = {r.lemma: r for r in reports}
        assert by_name["variance_trick"].violations == 0
        assert by_name["smooth_contraction"].violations == 0

    def test_deterministic(self, small_problem) -> None:
        """Test the same seed reproduces the same slacks."""
        first = verify_lemmas(draws=10, seed=5, problem=small_problem)
        second = verify_lemmas(draws=10, seed=5, problem=small_problem)
        assert [r.to_dict() for r in first] == [r.to_dict() for r in second]

    def test_draws_must_be_positive(self) -> None:
        """Test a zero draw count is rejected."""
        with pytest.raises(ConfigurationError):
            verify_lemmas(draws=0)

    @pytest.mark.slow
    def test_default_suite_has_no_violations(self) -> None:
        """Test 1000 draws on the default instance violate nothing."""
        reports = verify_lemmas(draws=1000, seed=0)
        assert all(r.violations == 0 for r in reports), [r.to_dict() for r in reports]
