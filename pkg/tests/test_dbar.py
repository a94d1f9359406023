"""
Tests for the planar dbar solver and the additive Cousin problem.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.hartogs_kit.dbar import (
    AdditiveCocycle,
    Cover,
    CoverSet,
    PartitionOfUnity,
    PlanarDomain,
    cauchy_transform,
    dbar_residual,
    laurent_split_cover,
    solve_cousin,
    sup_constant,
)
from src.hartogs_kit.errors import (
    CocycleViolation,
    DbarError,
    DegenerateDomain,
    NonFinite,
    ResolutionTooCoarse,
)


def inverse(z):
    return 1.0 / z


def quadratic(z):
    return z ** 2 - 0.5 / z ** 2


class TestPlanarDomain:
    """Test domain construction and lattices."""

    def test_default_spacing(self):
        """Test the spacing defaults to 1/64 of the smallest feature."""
        assert PlanarDomain.disk(1.0).spacing == pytest.approx(1.0 / 64)
        assert PlanarDomain.annulus(0.5, 1.0).spacing == pytest.approx(0.5 / 64)
        assert PlanarDomain.rectangle(2.0, 1.0).spacing == pytest.approx(1.0 / 64)

    def test_coarse_spacing_rejected(self):
        """Test spacing above 1/32 of the feature is refused."""
        with pytest.raises(ResolutionTooCoarse):
            PlanarDomain.disk(1.0, spacing=0.05)

    def test_degenerate(self):
        """Test an annulus with inner >= outer has no area."""
        with pytest.raises(DegenerateDomain):
            PlanarDomain.annulus(1.0, 1.0)

    def test_unknown_kind(self):
        """Test unknown domain kinds."""
        with pytest.raises(DbarError):
            PlanarDomain('triangle')

    def test_lattice_weights(self):
        """Test cell weights add up to roughly the area."""
        domain = PlanarDomain.disk(1.0)
        _, weights = domain.lattice
        assert np.sum(weights) * domain.spacing ** 2 == pytest.approx(np.pi, rel=1e-3)


class TestCauchyTransform:
    """Test the Cauchy transform and its estimate."""

    def test_constant_on_disk(self):
        """Test the transform of 1 on the unit disk is conj(z)."""
        domain = PlanarDomain.disk(1.0)
        u = cauchy_transform(lambda z: np.ones_like(z), domain)
        points = domain.lattice[0]
        keep = np.abs(points) < 0.8
        assert_allclose(u.values[keep], np.conj(points[keep]), atol=2e-2)
        assert u.residual <= 10.0 * u.expected_bound

    def test_sup_estimate(self):
        """Test |u| <= C |g| with C close to 2 on the unit disk."""
        domain = PlanarDomain.disk(1.0)
        constant = sup_constant(domain)
        assert constant == pytest.approx(2.0, rel=2e-2)
        u = cauchy_transform(lambda z: np.ones_like(z), domain)
        assert u.sup_norm() <= constant * (1.0 + 1e-6)

    @pytest.mark.parametrize('g', [
        lambda z: np.ones_like(z),
        lambda z: z,
        lambda z: np.conj(z),
        lambda z: np.abs(z) ** 2,
        lambda z: z * np.exp(-np.abs(z) ** 2),
    ], ids=['one', 'z', 'zbar', 'modulus', 'gaussian'])
    def test_fine_lattice(self, g):
        """Test the residual and the sup estimate on a 256 x 256 lattice of the unit disk."""
        domain = PlanarDomain.disk(1.0, spacing=1.0 / 128)
        u = cauchy_transform(g, domain)
        assert dbar_residual(domain, u, g) <= 1e-3
        constant = sup_constant(domain)
        assert 1.9 <= constant <= 2.1
        g_sup = float(np.max(np.abs(g(domain.grid_points()))))
        assert u.sup_norm() <= constant * g_sup * (1.0 + 1e-2)

    def test_vector_valued(self):
        """Test each component is transformed."""
        domain = PlanarDomain.annulus(0.5, 1.0)
        u = cauchy_transform(lambda z: np.stack([np.ones_like(z), z], axis=1), domain)
        assert u.values.shape == domain.lattice[0].shape + (2,)
        assert dbar_residual(domain, u, lambda z: np.stack([np.ones_like(z), z], axis=1)) \
            <= 10.0 * u.expected_bound

    def test_non_finite_source(self):
        """Test a source with a pole on the lattice."""
        with pytest.raises(NonFinite):
            cauchy_transform(inverse, PlanarDomain.disk(1.0))

    def test_residual_of_exact_solution(self):
        """Test centered differences of conj(z) give dbar = 1 exactly."""
        domain = PlanarDomain.disk(1.0)
        points = domain.lattice[0]
        assert dbar_residual(domain, np.conj(points), lambda z: np.ones_like(z)) < 1e-10


class TestCover:
    """Test covers and partitions of unity."""

    def test_standard_cover(self):
        """Test the standard cover covers the closed disk of radius 1.2."""
        cover = Cover.standard()
        cover.check()
        assert cover.overlap_pairs() == [(0, 1)]

    def test_gap_in_cover(self):
        """Test an uncovered point is reported."""
        with pytest.raises(DbarError):
            Cover((CoverSet('disk', 0j, 0.5),)).check()

    def test_partition_sums_to_one(self):
        """Test the partition of unity adds up to 1 where covered."""
        rho = PartitionOfUnity(Cover.standard()).values(np.array([0.0, 0.9, 1.1j]))
        assert_allclose(rho.sum(axis=0), 1.0)

    def test_split_needs_two_sets(self):
        """Test Laurent splitting refuses other covers."""
        cover = Cover((CoverSet('disk', 0j, 1.5),))
        with pytest.raises(DbarError):
            laurent_split_cover(cover)


class TestCousin:
    """Test the additive Cousin problem."""

    def test_laurent_split(self):
        """Test 1/z splits into c_0 = 0 and c_1 = -1/z."""
        cocycle = AdditiveCocycle.from_pairs({(0, 1): inverse})
        solution = solve_cousin(Cover.standard(), cocycle, method='laurent')
        assert solution.delta_residual < 1e-10
        assert_allclose(solution.evaluate(0, [0.3]), [[0.0]], atol=1e-10)
        assert_allclose(solution.evaluate(1, [1.1]), [[-1.0 / 1.1]], atol=1e-10)

    def test_partition_method(self):
        """Test the smooth-splitting route solves the coboundary equation."""
        cocycle = AdditiveCocycle.from_pairs({(0, 1): inverse})
        solution = solve_cousin(Cover.standard(), cocycle, method='partition')
        assert solution.delta_residual < 1e-10
        assert solution.method == 'partition'
        assert 0.0 < solution.ratio <= solution.constant < np.inf

    def test_laurent_constant(self):
        """Test the Laurent constant comes from the quarter circles of the overlap."""
        cocycle = AdditiveCocycle.from_pairs({(0, 1): inverse})
        solution = solve_cousin(Cover.standard(), cocycle, method='laurent')
        assert solution.constant == pytest.approx(0.925 / 0.025)
        assert 0.0 < solution.ratio <= solution.constant

    @pytest.mark.parametrize('method', ['partition', 'laurent'])
    def test_constant_does_not_depend_on_input(self, method):
        """Test two different cocycles report the same constant and respect it."""
        cover = Cover.standard()
        first = solve_cousin(cover, AdditiveCocycle.from_pairs({(0, 1): inverse}), method=method)
        second = solve_cousin(cover, AdditiveCocycle.from_pairs({(0, 1): quadratic}), method=method)
        assert first.constant == pytest.approx(second.constant, rel=1e-12)
        assert second.ratio <= second.constant

    @pytest.mark.parametrize('method', ['partition', 'laurent'])
    def test_linearity(self, method):
        """Test the solution of f + g is the sum of the solutions."""
        cover = Cover.standard()

        def total(z):
            return inverse(z) + quadratic(z)

        solutions = [solve_cousin(cover, AdditiveCocycle.from_pairs({(0, 1): fn}), method=method)
                     for fn in (inverse, quadratic, total)]
        z = 0.9 * np.exp(2j * np.pi * np.arange(64) / 64)
        difference = {alpha: solutions[0].evaluate(alpha, z) + solutions[1].evaluate(alpha, z)
                      - solutions[2].evaluate(alpha, z) for alpha in (0, 1)}
        assert np.max(np.abs(difference[0] - difference[1])) <= 1e-10
        assert np.max(np.abs(difference[0])) <= 1e-10

    def test_not_a_cocycle(self):
        """Test f_10 = f_01 violates antisymmetry."""
        cocycle = AdditiveCocycle.from_pairs({(0, 1): inverse, (1, 0): inverse})
        with pytest.raises(CocycleViolation):
            solve_cousin(Cover.standard(), cocycle)

    def test_unknown_method(self):
        """Test unknown methods are refused."""
        cocycle = AdditiveCocycle.from_pairs({(0, 1): inverse})
        with pytest.raises(DbarError):
            solve_cousin(Cover.standard(), cocycle, method='spectral')
