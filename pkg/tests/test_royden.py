"""
Tests for local straightening, the linear normalization and the
degree-by-degree normalization of chart transitions.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.hartogs_kit.errors import NotImmersion, NotNearIdentity, RoydenError
from src.hartogs_kit.fixtures import round_trip_changes
from src.hartogs_kit.jets import JetMap, jet_space
from src.hartogs_kit.royden import (
    ChartAtlas,
    assemble_tubular_map,
    factor_multiplicative_cocycle,
    jacobian_at_zero,
    normalize_transitions,
    straighten_chart,
    trivialize_linear_part,
)
from src.hartogs_kit.series import PowerSeriesMap


def scalar_matrix(fn):
    def B(z):
        return fn(np.asarray(z, dtype=complex)).reshape(-1, 1, 1)
    return B


@pytest.fixture(scope='module')
def round_trip():
    changes = round_trip_changes(degree=8, band=32)
    atlas = ChartAtlas.conjugated(changes)
    return changes, atlas, normalize_transitions(atlas)


class TestStraightenChart:
    """Test local charts flattening a disk."""

    def test_parabola(self):
        """Test h(z, z^2) = (z, 0) for the parabola."""
        phi = PowerSeriesMap.from_univariate([[0, 0], [1, 0], [0, 1]], 0.0, math.inf, polynomial=True)
        chart = straighten_chart(phi)
        z = np.array([0.1, -0.2j, 0.3 + 0.1j])
        flattened = chart.apply(np.column_stack([z, z ** 2]))
        assert_allclose(flattened, np.column_stack([z, np.zeros_like(z)]), atol=1e-12)
        assert chart.residual < 1e-12

    def test_not_immersion(self):
        """Test a singular disk (z^2, z^3) is refused."""
        phi = PowerSeriesMap.from_univariate([[0, 0], [0, 0], [1, 0], [0, 1]], 0.0, math.inf,
                                             polynomial=True)
        with pytest.raises(NotImmersion):
            straighten_chart(phi)


class TestMultiplicativeFactorization:
    """Test B = B_0 B_1^-1 on the overlap."""

    def test_scalar_laurent(self):
        """Test exp(0.1/z + 0.2 z) splits into its Laurent parts."""
        B = scalar_matrix(lambda z: np.exp(0.1 / z + 0.2 * z))
        fact = factor_multiplicative_cocycle(B)
        assert fact.residual < 1e-10
        assert_allclose(fact.inner(np.array([0.5]))[0, 0, 0], np.exp(0.1), atol=1e-10)
        assert_allclose(fact.outer(np.array([1.1]))[0, 0, 0], np.exp(-0.1 / 1.1), atol=1e-10)

    def test_nilpotent(self):
        """Test an upper triangular unipotent matrix function."""
        def B(z):
            z = np.asarray(z, dtype=complex)
            out = np.broadcast_to(np.eye(2, dtype=complex), (z.shape[0], 2, 2)).copy()
            out[:, 0, 1] = 0.3 * z
            return out

        fact = factor_multiplicative_cocycle(B)
        assert fact.residual < 1e-10

    def test_far_from_identity(self):
        """Test exp(2z) has a logarithm too large on |z| = 0.9."""
        with pytest.raises(NotNearIdentity):
            factor_multiplicative_cocycle(scalar_matrix(lambda z: np.exp(2.0 * z)))

    def test_deviation_bound(self):
        """Test 1 + 0.6 z is refused although its logarithm is small."""
        with pytest.raises(NotNearIdentity):
            factor_multiplicative_cocycle(scalar_matrix(lambda z: 1.0 + 0.6 * z))

    def test_inside_deviation_bound(self):
        """Test 1 + 0.45 z stays below the bound and factors through the inner chart."""
        fact = factor_multiplicative_cocycle(scalar_matrix(lambda z: 1.0 + 0.45 * z))
        assert fact.residual < 1e-10
        assert_allclose(fact.inner(np.array([0.0, 0.5]))[:, 0, 0], [1.0, 1.225], atol=1e-10)


class TestLinearPart:
    """Test the linear block of a transition."""

    def test_identity_block(self):
        """Test the identity transition has an identity block."""
        block = jacobian_at_zero(JetMap.identity(jet_space(2, 3, 8)))
        assert block.is_identity(np.array([0.9, 0.9j]))

    def test_trivialize(self):
        """Test B = 1 + 0.1/z with shear A = 0.2/z becomes the identity."""
        space = jet_space(1, 3, 8)
        T = JetMap.from_terms(space, {(1, (1,), -1): 0.1, (0, (1,), -1): 0.2})
        trivialization = trivialize_linear_part(jacobian_at_zero(T))
        assert trivialization.residual < 1e-9


class TestNormalizeTransitions:
    """Test degree-by-degree normalization."""

    def test_identity_atlas(self):
        """Test an identity transition needs no change and has infinite radius."""
        result = normalize_transitions(ChartAtlas.identity(2, degree=4, band=8))
        assert result.epsilon == math.inf
        assert result.residual == 0.0
        assert [row[0] for row in result.trace_rows()] == [2, 3, 4]

    def test_linear_terms_rejected(self):
        """Test a transition with a nontrivial linear part."""
        space = jet_space(1, 3, 8)
        T = JetMap.from_terms(space, {(1, (1,), -1): 0.1})
        atlas = ChartAtlas(T, (JetMap.identity(space), JetMap.identity(space)))
        with pytest.raises(RoydenError):
            normalize_transitions(atlas)

    def test_round_trip_recovers_changes(self, round_trip):
        """Test H_alpha = g_alpha^-1 for a conjugated trivial atlas."""
        changes, _, result = round_trip
        for alpha in (0, 1):
            assert_allclose(result.changes[alpha].coeffs, changes[alpha].inverse().coeffs, atol=1e-9)
        assert result.residual < 1e-7

    def test_round_trip_radius(self, round_trip):
        """Test the fitted polyradius is within a factor two of 0.9 / e."""
        _, _, result = round_trip
        # w2 / (1 + e w1 / z) in the outer change diverges at |w1| = |z| / e, norms use |z| = 0.9
        known = 0.9 / np.e
        assert 0.5 * known <= result.epsilon <= 2.0 * known
        lo, hi = result.epsilon_interval
        assert lo <= result.epsilon <= hi

    def test_cousin_constant_is_uniform(self, round_trip):
        """Test the Cousin constant agrees across the degrees that needed a correction."""
        _, _, result = round_trip
        constants = [row[4] for row in result.trace_rows() if row[4] > 0]
        assert len(constants) >= 2
        assert max(constants) - min(constants) <= 0.2 * max(constants)

    def test_inner_change_has_no_poles(self, round_trip):
        """Test the inner chart's change keeps only nonnegative Laurent powers."""
        _, _, result = round_trip
        space = result.changes[0].space
        assert not np.any(result.changes[0].coeffs[:, :, space.powers < 0])

    def test_atlas_consistency(self, round_trip):
        """Test T_01 o T_10 is the identity."""
        _, atlas, _ = round_trip
        assert atlas.consistency() < 1e-10

    def test_save_and_load(self, round_trip, tmp_path):
        """Test atlases survive a CSV round trip."""
        _, atlas, _ = round_trip
        atlas.save(tmp_path)
        loaded = ChartAtlas.load(tmp_path, 2, 8, 32)
        assert_allclose(loaded.transition.coeffs, atlas.transition.coeffs)
        assert_allclose(loaded.ambient[1].coeffs, atlas.ambient[1].coeffs)


class TestTubularMap:
    """Test gluing the normalized charts."""

    def test_round_trip_is_identity(self, round_trip):
        """Test the glued map of a conjugated trivial atlas is the identity."""
        _, _, result = round_trip
        tube = assemble_tubular_map(result)
        Z = np.array([[0.3, 0.01, -0.02j], [1.05j, 0.02, 0.01]])
        assert_allclose(tube.evaluate(Z), Z, atol=1e-9)
        assert tube.agreement < 1e-9
        assert tube.restriction_defect < 1e-9
        assert tube.biholomorphy_defect(Z) < 1e-10

    def test_evaluate_at_disk_center(self, round_trip):
        """Test the glued map is finite and the identity at z = 0 and z = 0.3."""
        _, _, result = round_trip
        tube = assemble_tubular_map(result)
        Z = np.array([[0.0, 0.01, -0.02j], [0.3, 0.01, -0.02j], [0.05j, 0.02, 0.01]])
        values = tube.evaluate(Z)
        assert np.all(np.isfinite(values))
        assert_allclose(values, Z, atol=1e-8)

    def test_identity_fibre_series(self):
        """Test fibres of the identity tube."""
        tube = assemble_tubular_map(normalize_transitions(ChartAtlas.identity(2, degree=3, band=8)))
        fibre = tube.fibre_series(0.3)
        assert_allclose(fibre.evaluate_batch([[0.1, 0.05]]), [[0.3, 0.1, 0.05]])
