"""
Tests for circle and polytorus coefficient extraction and the CR residual.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.hartogs_kit.errors import GridTooSmall, NonFiniteSample, QuadratureError
from src.hartogs_kit.quadrature import (
    CircleSampler,
    circle_coefficients,
    cr_residual,
    next_power_of_two,
    polytorus_coefficients,
    sample_grid,
)


class TestCircleSampler:
    """Test contour validation."""

    def test_power_of_two_required(self):
        """Test node counts must be powers of two."""
        with pytest.raises(QuadratureError):
            CircleSampler(1.0, 100)

    def test_radius_positive(self):
        """Test the radius must be positive."""
        with pytest.raises(QuadratureError):
            CircleSampler(0.0)

    def test_next_power_of_two(self):
        """Test rounding up and clamping."""
        assert next_power_of_two(100) == 128
        assert next_power_of_two(3) == 16


class TestCircleCoefficients:
    """Test trapezoidal Cauchy coefficients."""

    def test_laurent_polynomial(self):
        """Test 3/z + 2 + z^2 on the circle of radius 0.5."""
        laurent = circle_coefficients(lambda z: 3.0 / z + 2.0 + z ** 2, (-2, 3), CircleSampler(0.5, 64))
        assert_allclose(laurent.coeffs, [0, 3, 2, 0, 1, 0], atol=1e-12)
        assert laurent.discarded_bound < 1e-12

    def test_geometric_coefficients(self):
        """Test 1/(2 - z) has coefficients 2^-(k+1)."""
        laurent = circle_coefficients(lambda z: 1.0 / (2.0 - z), (0, 20), CircleSampler(1.0, 256))
        assert_allclose(laurent.coeffs, 0.5 ** (np.arange(21) + 1), atol=1e-14)

    def test_parts_and_evaluate(self):
        """Test the positive and negative parts reassemble the function."""
        laurent = circle_coefficients(lambda z: 1.0 / z + z, None, CircleSampler(1.0, 32))
        zeta = np.array([0.9, 1.1j])
        total = laurent.positive_part().evaluate(zeta) + laurent.negative_part().evaluate(zeta)
        assert_allclose(total, 1.0 / zeta + zeta, atol=1e-12)
        assert laurent.max_abs(-1, -1) == pytest.approx(1.0)

    def test_vector_valued(self):
        """Test vector functions give one coefficient column per component."""
        laurent = circle_coefficients(lambda z: np.stack([z, 2.0 * z ** 2], axis=1), (0, 3),
                                      CircleSampler(1.0, 16))
        assert laurent.coeffs.shape == (4, 2)
        assert_allclose(laurent.coefficient(2), [0.0, 2.0], atol=1e-12)

    def test_trimmed_keeps_true_band(self):
        """Test trimming drops roundoff so the band is usable far from the circle."""
        def f(z):
            return 2.0 / z + 1.0 + 3.0 * z ** 2

        laurent = circle_coefficients(f, None, CircleSampler(0.9, 1024)).trimmed(0.9)
        assert (laurent.k_min, laurent.k_max) == (-1, 2)
        assert_allclose(laurent.coeffs, [2.0, 1.0, 0.0, 3.0], atol=1e-12)
        assert laurent.discarded_bound < 1e-11
        zeta = np.array([0.05, 3.0j])
        assert_allclose(laurent.evaluate(zeta), f(zeta), rtol=1e-12)

    def test_trimmed_zero_function(self):
        """Test a vanishing function trims to a single zero coefficient."""
        laurent = circle_coefficients(lambda z: np.zeros((z.shape[0], 2)), None, CircleSampler(1.0, 16))
        trimmed = laurent.trimmed(1.0)
        assert trimmed.k_min == 0
        assert trimmed.coeffs.shape == (1, 2)
        assert not np.any(trimmed.coeffs)

    def test_non_finite_sample(self):
        """Test a pole on the contour is reported."""
        with pytest.raises(NonFiniteSample):
            circle_coefficients(lambda z: 1.0 / (z - 1.0), (0, 4), CircleSampler(1.0, 16))

    def test_band_too_wide(self):
        """Test bands that alias are refused."""
        with pytest.raises(QuadratureError):
            circle_coefficients(lambda z: z, (0, 16), CircleSampler(1.0, 16))


class TestPolytorus:
    """Test tensor-product coefficients."""

    def test_two_variable_monomial(self):
        """Test z1 * z2^2 on radii (0.5, 2)."""
        table = polytorus_coefficients(lambda Z: Z[:, 0] * Z[:, 1] ** 2, [(0, 2), (0, 3)],
                                       radii=(0.5, 2.0), node_count=16)
        assert complex(table.coefficient((1, 2))) == pytest.approx(1.0)
        assert abs(table.coefficient((0, 0))) < 1e-12
        assert abs(table.coefficient((5, 5))) == 0.0


class TestCauchyRiemann:
    """Test the centered dbar residual."""

    def test_holomorphic_polynomial(self):
        """Test z^2 has no dbar residual."""
        samples = sample_grid(lambda z: z ** 2, 0.3 + 0.1j, 1e-2, 8)
        assert cr_residual(samples, 1e-2) < 1e-10

    def test_conjugate(self):
        """Test conj(z) has dbar equal to 1."""
        samples = sample_grid(np.conj, 0.0, 1e-2, 8)
        assert cr_residual(samples, 1e-2) == pytest.approx(1.0)

    def test_grid_too_small(self):
        """Test grids below 4x4 are refused."""
        with pytest.raises(GridTooSmall):
            cr_residual(np.zeros((3, 3)))
