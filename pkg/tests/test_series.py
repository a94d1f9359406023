"""
Tests for power series calculus on truncated vectors.

Tests radius fitting, evaluation with tail bounds, univariate coefficient
arithmetic, recentering, composition and inversion.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.hartogs_kit.errors import InsufficientTerms, OutOfRadius, SeriesError
from src.hartogs_kit.series import (
    HomogeneousMap,
    PowerSeriesMap,
    TruncatedVector,
    compose,
    compose_univariate,
    derivative,
    estimate_radius,
    eval_series,
    fit_log_linear,
    homogeneous_norm,
    invert_series,
    invert_univariate,
    shift_center,
    sphere_samples,
    univariate_coefficients,
)


def quadratic_shear(polynomial: bool = True) -> PowerSeriesMap:
    """(z1 + z2^2, z2) on C^2"""
    terms = [
        HomogeneousMap.constant(np.zeros(2)),
        HomogeneousMap.linear(np.eye(2)),
        HomogeneousMap.from_monomials({(0, 2): [1.0, 0.0]}, 2, 2),
    ]
    return PowerSeriesMap.build(np.zeros(2), terms, polynomial=polynomial)


class TestTruncatedVector:
    """Test l2 points with tail bounds."""

    def test_add_pads_and_sums_tails(self):
        """Test vectors of different length add with padding."""
        a = TruncatedVector.of(1, 2, tail_bound=1e-3)
        b = TruncatedVector.of(1, 1, 1, tail_bound=2e-3)
        total = a + b
        assert_allclose(total.coords, [2, 3, 1])
        assert total.tail_bound == pytest.approx(3e-3)

    def test_negative_tail_rejected(self):
        """Test tail bounds must be nonnegative."""
        with pytest.raises(ValueError):
            TruncatedVector.of(1.0, tail_bound=-1.0)


class TestHomogeneousMap:
    """Test homogeneous polynomial terms."""

    def test_monomial_evaluation(self):
        """Test z1 * z2 evaluates through the symmetric tensor."""
        P = HomogeneousMap.from_monomials({(1, 1): 1.0}, 2, 1)
        assert_allclose(P.evaluate([2.0, 3.0]), [6.0])

    def test_ridge_norm_is_exact(self):
        """Test the ridge map carries its exact norm."""
        P = HomogeneousMap.ridge([3.0, 4.0], [1.0, 0.0], 2)
        assert P.norm_estimate == pytest.approx(5.0)
        assert_allclose(P.evaluate([2.0, 7.0]), [12.0, 16.0])

    def test_norm_is_lower_bound(self):
        """Test the sampled norm of diag(2, 1) reaches 2 without exceeding it."""
        P = HomogeneousMap.linear(np.diag([2.0, 1.0]))
        value = homogeneous_norm(P, 64)
        assert value <= 2.0 + 1e-12
        assert value >= 2.0 - 1e-9

    def test_homogeneity(self):
        """Test P(lambda x) = lambda^n P(x) for a random cubic at random points."""
        rng = np.random.default_rng(7)
        tensor = rng.normal(size=(2, 3, 3, 3)) + 1j * rng.normal(size=(2, 3, 3, 3))
        P = HomogeneousMap.from_tensor(tensor)
        norm = homogeneous_norm(P, 64)
        for _ in range(5):
            x = rng.normal(size=3) + 1j * rng.normal(size=3)
            x /= np.linalg.norm(x)
            lam = complex(rng.normal(), rng.normal())
            defect = np.linalg.norm(P.evaluate(lam * x) - lam ** 3 * P.evaluate(x))
            assert defect <= 1e-10 * norm * abs(lam) ** 3

    def test_high_degree_tensor_is_symmetrized(self):
        """Test a degree-9 tensor is stored symmetric and evaluates unchanged."""
        rng = np.random.default_rng(3)
        tensor = rng.normal(size=(1,) + (2,) * 9).astype(complex)
        P = HomogeneousMap.from_tensor(tensor)
        assert_allclose(P.tensor, np.swapaxes(P.tensor, 1, 9), atol=1e-14)
        assert_allclose(P.tensor, np.swapaxes(P.tensor, 2, 5), atol=1e-14)

        x = np.array([0.7, -0.4j])
        direct = tensor
        for _ in range(9):
            direct = direct @ x
        assert_allclose(P.evaluate(x), direct, rtol=1e-12, atol=1e-12)

    def test_mixed_degrees_rejected(self):
        """Test monomials of different degree cannot share a term."""
        with pytest.raises(SeriesError):
            HomogeneousMap.from_monomials({(1, 0): 1.0, (1, 1): 1.0}, 2, 1)


class TestRadius:
    """Test Cauchy-Hadamard radius estimation."""

    def test_geometric_series(self):
        """Test 1/(1-z) has radius 1."""
        series = PowerSeriesMap.from_univariate(np.ones(21))
        assert series.radius_estimate == pytest.approx(1.0, abs=1e-9)

    def test_half_powers(self):
        """Test coefficients 2^-n give radius 2."""
        series = PowerSeriesMap.from_univariate(0.5 ** np.arange(21))
        assert series.radius_estimate == pytest.approx(2.0, rel=1e-9)

    def test_polynomial_is_entire(self):
        """Test polynomial series have infinite radius."""
        series = PowerSeriesMap.from_univariate([1.0, 2.0, 3.0], polynomial=True)
        assert math.isinf(estimate_radius(series))

    def test_too_few_terms(self):
        """Test fitting needs four nonzero terms."""
        with pytest.raises(InsufficientTerms):
            PowerSeriesMap.from_univariate([1.0, 1.0, 1.0])

    def test_log_linear_fit(self):
        """Test an exact geometric sequence is fitted exactly."""
        fit = fit_log_linear([1, 2, 3, 4, 5, 6], [3.0 ** n for n in range(1, 7)])
        assert fit.slope == pytest.approx(math.log(3.0))
        assert fit.stderr == pytest.approx(0.0, abs=1e-12)


class TestEvaluation:
    """Test evaluation with certified tails."""

    def test_tail_bound_covers_error(self):
        """Test the geometric remainder bounds the truncation error of 1/(1-z)."""
        series = PowerSeriesMap.from_univariate(np.ones(41))
        value = eval_series(series, 0.5)
        assert abs(value.coords[0] - 2.0) <= value.tail_bound
        assert value.tail_bound < 1e-11

    def test_out_of_radius(self):
        """Test points on the radius are refused."""
        series = PowerSeriesMap.from_univariate(np.ones(21))
        with pytest.raises(OutOfRadius):
            eval_series(series, 1.0)

    def test_polynomial_has_no_tail(self):
        """Test polynomial evaluation is exact up to roundoff."""
        series = PowerSeriesMap.from_univariate([1.0, 2.0, 3.0], polynomial=True)
        value = series.evaluate(10.0)
        assert_allclose(value.coords, [321.0])
        assert value.tail_bound < 1e-10


class TestUnivariate:
    """Test coefficient arithmetic in one variable."""

    def test_reversion(self):
        """Test the inverse of z + z^2 has Catalan coefficients."""
        g = invert_univariate(np.array([0.0, 1.0, 1.0]), 5)
        assert_allclose(g, [0, 1, -1, 2, -5, 14], atol=1e-12)
        identity = compose_univariate(np.array([0.0, 1.0, 1.0]), g, 5)
        assert_allclose(identity, [0, 1, 0, 0, 0, 0], atol=1e-12)

    def test_reversion_needs_invertible_linear_part(self):
        """Test reversion refuses p'(0) = 0."""
        with pytest.raises(SeriesError):
            invert_univariate(np.array([0.0, 0.0, 1.0]), 4)


class TestRecentering:
    """Test shift_center, derivative, compose and invert_series."""

    def test_shift_polynomial(self):
        """Test 1 + 2z + 3z^2 re-expanded at 1."""
        series = PowerSeriesMap.from_univariate([1.0, 2.0, 3.0], polynomial=True)
        shifted = shift_center(series, 1.0)
        assert_allclose(univariate_coefficients(shifted)[:, 0], [6.0, 8.0, 3.0], atol=1e-12)

    def test_derivative_off_center(self):
        """Test the Frechet derivative of z1^2 + z1 z2 at (1, 2)."""
        terms = [
            HomogeneousMap.constant([0.0]),
            HomogeneousMap.zero(1, 2, 1),
            HomogeneousMap.from_monomials({(2, 0): 1.0, (1, 1): 1.0}, 2, 1),
        ]
        series = PowerSeriesMap.build(np.zeros(2), terms, polynomial=True)
        assert_allclose(derivative(series, [1.0, 2.0]), [[4.0, 1.0]], atol=1e-12)

    def test_compose_polynomials(self):
        """Test the shear composed with itself."""
        shear = quadratic_shear()
        twice = compose(shear, shear)
        assert_allclose(twice.evaluate_batch([[0.1, 0.2]]), [[0.18, 0.2]], atol=1e-12)

    def test_invert_shear(self):
        """Test the inverse of (z1 + z2^2, z2) is (y1 - y2^2, y2)."""
        inverse = invert_series(quadratic_shear())
        assert_allclose(inverse.evaluate_batch([[0.3, 0.2]]), [[0.26, 0.2]], atol=1e-12)

    def test_invert_singular(self):
        """Test a singular linear part is refused."""
        terms = [HomogeneousMap.constant(np.zeros(2)), HomogeneousMap.linear([[1.0, 1.0], [1.0, 1.0]])]
        series = PowerSeriesMap.build(np.zeros(2), terms, polynomial=True)
        with pytest.raises(SeriesError):
            invert_series(series)


class TestSphereSamples:
    """Test deterministic sphere sampling."""

    def test_unit_norm_and_deterministic(self):
        """Test samples lie on the sphere and repeat for a fixed seed."""
        a = sphere_samples(50, 3, seed=7)
        b = sphere_samples(50, 3, seed=7)
        assert a.shape == (50, 3)
        assert_allclose(np.linalg.norm(a, axis=1), 1.0)
        assert_allclose(a, b)
