"""
Tests for fibre jets with Laurent coefficients.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.hartogs_kit.errors import RoydenError
from src.hartogs_kit.fixtures import round_trip_changes
from src.hartogs_kit.jets import JetMap, jet_space, laurent_band


@pytest.fixture
def changes():
    return round_trip_changes(degree=8, band=32)


@pytest.fixture
def point():
    return np.array([[0.9, 0.01, 0.008j]], dtype=complex)


class TestJetSpace:
    """Test monomial bookkeeping."""

    def test_sizes(self):
        """Test monomial count and band width."""
        space = jet_space(2, 3, 4)
        assert space.size == 10
        assert space.width == 9
        assert space.monomials[:3] == ((0, 0), (1, 0), (0, 1))

    def test_power_outside_band(self):
        """Test Laurent powers beyond the band are refused."""
        with pytest.raises(RoydenError):
            jet_space(1, 2, 4).column(5)

    def test_invalid_space(self):
        """Test degree 0 is refused."""
        with pytest.raises(RoydenError):
            jet_space(1, 0, 4)


class TestJetMap:
    """Test construction, evaluation and composition."""

    def test_identity(self):
        """Test the identity jet."""
        Z = np.array([[0.5, 0.1, 0.2j]])
        assert_allclose(JetMap.identity(jet_space(2, 3, 4)).evaluate(Z), Z)

    def test_from_terms(self, changes):
        """Test g_0 adds w1^2 / 2 to the first fibre coordinate."""
        g0, _ = changes
        value = g0.evaluate([[0.9, 0.3, 0.1]])
        assert_allclose(value, [[0.9, 0.345, 0.1]])

    def test_exponent_beyond_degree(self):
        """Test monomials above the jet degree are refused."""
        with pytest.raises(RoydenError):
            JetMap.from_terms(jet_space(1, 2, 4), {(1, (3,), 0): 1.0})

    def test_compose_matches_nested_evaluation(self, changes, point):
        """Test (g o g)(Z) = g(g(Z)) for small fibre values."""
        for g in changes:
            composite = g.compose(g)
            assert_allclose(composite.evaluate(point), g.evaluate(g.evaluate(point)), atol=1e-12)

    def test_inverse(self, changes, point):
        """Test g^-1(g(Z)) = Z."""
        for g in changes:
            assert_allclose(g.inverse().evaluate(g.evaluate(point)), point, atol=1e-10)

    def test_inverse_needs_identity_linear_part(self):
        """Test maps with a non-identity linear part are refused."""
        jet = JetMap.from_terms(jet_space(2, 3, 4), {(1, (1, 0), 0): 1.0})
        with pytest.raises(RoydenError):
            jet.inverse()

    def test_min_degree(self, changes):
        """Test g_0 - id starts in degree 2."""
        g0, _ = changes
        assert (g0 - JetMap.identity(g0.space)).min_degree() == 2
        assert JetMap.zeros(g0.space).min_degree() is None

    def test_degree_norms(self, changes):
        """Test per-degree norms of w1^2 / 2."""
        g0, _ = changes
        norms = (g0 - JetMap.identity(g0.space)).degree_norms([1.0])
        assert norms[2] == pytest.approx(0.5)
        assert norms[3:].max() == 0.0

    def test_jacobian(self, changes):
        """Test dw1'/dw1 = 1 + w1 for g_0."""
        g0, _ = changes
        jacobian = g0.jacobian([[0.9, 0.3, 0.1]])
        assert jacobian[0, 1, 1] == pytest.approx(1.3)
        assert jacobian[0, 0, 0] == pytest.approx(1.0)


class TestLaurentBand:
    """Test sampled Laurent coefficients."""

    def test_coefficients(self):
        """Test z^-2 + 3z."""
        space = jet_space(1, 2, 4)
        band = laurent_band(lambda z: (z ** -2 + 3.0 * z)[:, None], space, 0.9)
        assert band.shape == (1, space.width)
        assert band[0, space.column(-2)] == pytest.approx(1.0)
        assert band[0, space.column(1)] == pytest.approx(3.0)
        assert abs(band[0, space.column(0)]) < 1e-12

    def test_degree_block_round_trip(self, changes):
        """Test sampling a degree block and writing it back leaves g_1 unchanged."""
        _, g1 = changes
        laurent = laurent_band(g1.coefficient_function(2), g1.space, 0.9)
        rebuilt = g1.with_degree_coefficients(2, laurent)
        assert_allclose(rebuilt.coeffs, g1.coeffs, atol=1e-12)
