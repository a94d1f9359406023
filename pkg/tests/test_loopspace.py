"""
Tests for Sobolev loops and holomorphic families of loops.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from src.hartogs_kit.errors import LoopError, LoopEscapesBall, NotHolomorphic
from src.hartogs_kit.hartogs import HartogsFigure
from src.hartogs_kit.loopspace import (
    LoopFamily,
    SobolevLoop,
    ball_automorphism,
    check_smoothness,
    evaluate_loop,
    extend_loop_family,
    l2_norm_trapezoid,
    loop_from_samples,
    mobius_disk_family,
    sobolev_norm,
)


def two_modes():
    return {1: lambda Z: 1.0 / (2.0 - Z[:, -1]), -1: lambda Z: Z[:, 0]}


class TestSobolevLoop:
    """Test loops and their norms."""

    def test_smoothness(self):
        """Test k must be an integer of at least 1 on the circle."""
        check_smoothness(1)
        with pytest.raises(LoopError):
            check_smoothness(0)
        with pytest.raises(LoopError):
            check_smoothness(1.5)

    def test_norm(self):
        """Test the weighted norm of e^{is} + 0.5 e^{-is}."""
        loop = SobolevLoop.from_modes({1: [1.0], -1: [0.5]}, 1, k=1)
        assert sobolev_norm(loop) == pytest.approx(math.sqrt(5.0))
        assert loop.mode_count == 1

    def test_bad_shape(self):
        """Test an even number of coefficient rows."""
        with pytest.raises(LoopError):
            SobolevLoop(np.zeros((4, 1)))

    def test_evaluate(self):
        """Test values at s = 0 and s = pi."""
        loop = SobolevLoop.from_modes({0: [0.5], 2: [1.0j]}, 1)
        assert_allclose(evaluate_loop(loop, [0.0, np.pi]), [[0.5 + 1.0j], [0.5 + 1.0j]])
        assert loop.coefficient(7)[0] == 0.0

    def test_from_samples(self):
        """Test Fourier coefficients recovered from samples."""
        s = 2.0 * np.pi * np.arange(64) / 64
        loop = loop_from_samples(np.exp(1j * s) + 0.5 * np.exp(-2j * s), k=1, mode_count=4)
        assert loop.coefficient(1)[0] == pytest.approx(1.0)
        assert loop.coefficient(-2)[0] == pytest.approx(0.5)
        assert loop.tail_bound < 1e-12

    def test_too_few_samples(self):
        """Test the mode count must fit the sample count."""
        with pytest.raises(LoopError):
            loop_from_samples(np.ones(8), mode_count=4)

    def test_l2_norm(self):
        """Test the trapezoidal L2 norm."""
        assert l2_norm_trapezoid(lambda s: np.exp(1j * s) + 0.5) == pytest.approx(math.sqrt(1.25))


class TestLoopFamily:
    """Test holomorphic families of loops."""

    def test_pointwise_norm(self):
        """Test the norm of the two-mode family at (0, 0.9)."""
        family = LoopFamily(two_modes(), 1, HartogsFigure(1, 1, 0.2), k=1)
        assert family.sobolev_at([[0.0, 0.9]])[0] == pytest.approx(2.0 / 1.1)

    def test_extension(self):
        """Test the extended family off the figure and its certificate."""
        family = LoopFamily(two_modes(), 1, HartogsFigure(1, 1, 0.2), k=1)
        extended = extend_loop_family(family)
        assert extended.sobolev_at([[0.0, 0.7]])[0] == pytest.approx(2.0 / 1.3, abs=1e-8)
        assert extended.interior_max <= extended.boundary_max * (1.0 + 1e-6)
        loop = extended.loop_at([0.3, 0.5])
        assert loop.coefficient(-1)[0] == pytest.approx(0.3, abs=1e-8)
        assert loop.coefficient(1)[0] == pytest.approx(1.0 / 1.5, abs=1e-8)

    def test_failing_mode_is_named(self):
        """Test a non-holomorphic coefficient reports its mode."""
        modes = two_modes()
        modes[3] = lambda Z: np.conj(Z[:, 1])
        family = LoopFamily(modes, 1, HartogsFigure(1, 1, 0.2))
        with pytest.raises(NotHolomorphic, match="mode m=3"):
            extend_loop_family(family)


class TestMobiusFamily:
    """Test the ball automorphism and the disk family through a loop."""

    def test_automorphism(self):
        """Test h_a swaps a and 0 and is an involution."""
        a = np.array([0.3, 0.2j])
        z = np.array([0.1, -0.4])
        assert_allclose(ball_automorphism(a, a), [[0.0, 0.0]], atol=1e-15)
        assert_allclose(ball_automorphism(a, np.zeros(2)), [a])
        assert_allclose(ball_automorphism(a, ball_automorphism(a, z)), [z], atol=1e-14)

    def test_escaping_loop(self):
        """Test a base loop leaving the unit disk."""
        base = SobolevLoop.from_modes({0: [0.9], 1: [0.3]}, 1)
        fibre = SobolevLoop.from_modes({1: [0.1]}, 1)
        with pytest.raises(LoopEscapesBall):
            mobius_disk_family(base, fibre)

    def test_disk_through_loop(self):
        """Test phi_1(0, s) traces (f^q, f^n) and boundary disks stay on the sphere."""
        base = SobolevLoop.from_modes({0: [0.2], 1: [0.3]}, 1)
        fibre = SobolevLoop.from_modes({-1: [0.25j], 2: [0.4]}, 1)
        family = mobius_disk_family(base, fibre)
        assert family.shell < 1e-12
        loop = family.loop_at(1.0, [0.0], mode_count=4)
        assert_allclose(loop.coefficient(1), [0.3, 0.0], atol=1e-12)
        assert_allclose(loop.coefficient(-1), [0.0, 0.25j], atol=1e-12)
        assert_allclose(loop.coefficient(2), [0.0, 0.4], atol=1e-12)
        assert_allclose(family.loop_at(0.0, [0.0], mode_count=4).coeffs[:, 1], 0.0, atol=1e-15)
