"""
Tests for continuation of holomorphic maps along families of disks.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.hartogs_kit.continuation import (
    DiskFamily,
    Region,
    RegionFunction,
    StepControl,
    check_family,
    continue_along,
    prolong_cylinder,
)
from src.hartogs_kit.errors import BoundaryEscape, ContinuationError, HartogsKitError, StepCollapse


def translated(speed):
    def phi(t, lam):
        return np.stack([lam, np.full_like(lam, speed * t)], axis=1)
    return phi


def inverse_x1(X):
    return 1.0 / (X[:, 1] - 2.0)


@pytest.fixture(scope='module')
def translated_run():
    family = DiskFamily(translated(0.3), 2, np.linspace(0.0, 1.0, 3))
    return family, continue_along(inverse_x1, family)


class TestRegion:
    """Test regions and restricted functions."""

    def test_ball(self):
        """Test ball membership."""
        region = Region.ball(1.0)
        assert list(region.contains(np.array([[0.5, 0.5], [1.0, 0.5]]))) == [True, False]

    def test_everywhere(self):
        """Test the whole space."""
        assert Region.everywhere().contains(np.array([[1e6, 0.0]]))[0]

    def test_restricted_function(self):
        """Test queries outside the region are refused."""
        f = RegionFunction(inverse_x1, Region.ball(1.0))
        assert_allclose(f(np.array([[0.0, 0.5]])), [1.0 / -1.5])
        with pytest.raises(BoundaryEscape):
            f(np.array([[0.0, 1.5]]))

    def test_prolong_cylinder(self):
        """Test the prolongation ignores the first coordinate."""
        F = prolong_cylinder(inverse_x1)
        assert_allclose(F(np.array([[7.0, 0.0, 0.5]])), [1.0 / -1.5])


class TestDiskFamily:
    """Test families of analytic disks."""

    def test_grid_validation(self):
        """Test a grid must increase."""
        with pytest.raises(ContinuationError):
            DiskFamily(translated(0.3), 2, np.array([0.0, 0.0]))

    def test_taylor(self):
        """Test Taylor coefficients of (lam, 0.3 t + 0.1 lam^2)."""
        def phi(t, lam):
            return np.stack([lam, 0.3 * t + 0.1 * lam ** 2], axis=1)

        coeffs, outside = DiskFamily(phi, 2, band=8).taylor(1.0)
        assert coeffs.shape == (9, 2)
        assert_allclose(coeffs[:3], [[0.0, 0.3], [1.0, 0.0], [0.0, 0.1]], atol=1e-12)
        assert outside < 1e-12

    def test_check_family(self):
        """Test the modulus of continuity of a translation."""
        family = DiskFamily(translated(0.3), 2)
        report = check_family(family, Region.everywhere())
        assert report.ok
        assert report.modulus == pytest.approx(0.3)
        assert report.cr_residual < 1e-6

    def test_step_control(self):
        """Test invalid step settings."""
        with pytest.raises(ContinuationError):
            StepControl(min_step=0.5, initial_step=0.25)


class TestContinueAlong:
    """Test the continuation loop."""

    def test_initial_disk_outside_region(self):
        """Test condition i is checked before any extension."""
        family = DiskFamily(translated(0.3), 2)
        with pytest.raises(BoundaryEscape):
            continue_along(inverse_x1, family, region=Region.ball(0.5))

    @pytest.mark.slow
    def test_translated_disks(self, translated_run):
        """Test the continued value at the center of the last disk."""
        family, result = translated_run
        assert result.final.t == 1.0
        assert result.trace[-1][6] == pytest.approx(1.0 / (0.3 - 2.0), abs=1e-7)
        assert_allclose(result.value(family.at(1.0, [0.0])), [1.0 / (0.3 - 2.0)], atol=1e-7)

    @pytest.mark.slow
    def test_halved_steps(self, translated_run):
        """Test smaller steps reproduce the continued values."""
        family, result = translated_run
        finer = continue_along(inverse_x1, family, StepControl(initial_step=0.03125))
        assert len(finer.elements) > len(result.elements)
        lam = np.array([0.0, 0.3, -0.2j])
        X = family.at(1.0, lam)
        assert_allclose(finer.value(X, lam), result.value(X, lam), atol=1e-9)
        assert_allclose(finer.value(X, lam), inverse_x1(X), atol=1e-7)

    @pytest.mark.slow
    def test_rotated_frame(self, translated_run):
        """Test a rotated normal frame gives the same continued values."""
        family, result = translated_run
        c, s = np.cos(0.4), np.sin(0.4)
        frame = np.array([[c, 1j * s], [1j * s, c]])
        rotated = continue_along(inverse_x1, family, StepControl(frame=frame))
        lam = np.array([0.0, 0.3, -0.2j])
        X = family.at(1.0, lam)
        assert_allclose(rotated.value(X, lam), result.value(X, lam), atol=1e-8)


    @pytest.mark.slow
    def test_step_collapse(self):
        """Test a family moving too fast for the tube."""
        family = DiskFamily(translated(10.0), 2)
        with pytest.raises(StepCollapse):
            continue_along(inverse_x1, family, StepControl(min_step=0.1))

    @pytest.mark.slow
    def test_approaching_pole(self):
        """Test failures are tagged with the parameter where they happened."""
        def f(X):
            return 1.0 / (X[:, 0] + 2.0 * X[:, 1] - 2.2)

        family = DiskFamily(translated(0.5), 2)
        with pytest.raises(HartogsKitError, match="at t="):
            continue_along(f, family)
