"""
Cauchy-integral coefficient extraction on circles and polytori.

All contours are circles, so the trapezoidal rule on equispaced nodes is
spectrally accurate and reduces to an FFT of the node values. Coefficients
outside the requested band are discarded with a recorded bound.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import GridTooSmall, NonFiniteSample, QuadratureError

logger = logging.getLogger(__name__)

DEFAULT_NODES = 256
MIN_NODES = 16
DEFAULT_TORUS_NODES = 64
NOISE_FLOOR = 1e-13


def next_power_of_two(n: float, lower: int = MIN_NODES, upper: int = 1 << 14) -> int:
    """Smallest power of two >= n, clamped to [lower, upper]"""
    value = lower
    while value < n and value < upper:
        value <<= 1
    return value


def _check_finite(values: np.ndarray, where: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise NonFiniteSample(f"{bad} non-finite sample(s) on {where}")


@dataclass(frozen=True, eq=False)
class CircleSampler:
    """Equispaced nodes rho * exp(2 pi i j / node_count), optionally with sampled values"""

    radius: float
    node_count: int = DEFAULT_NODES
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.radius > 0:
            raise QuadratureError(f"circle radius must be positive, got {self.radius}")
        n = self.node_count
        if n < MIN_NODES or n & (n - 1):
            raise QuadratureError(f"node_count must be a power of two >= {MIN_NODES}, got {n}")
        if self.samples is not None and np.shape(self.samples)[0] != n:
            raise QuadratureError(f"expected {n} samples, got {np.shape(self.samples)[0]}")

    @property
    def nodes(self) -> np.ndarray:
        j = np.arange(self.node_count)
        return self.radius * np.exp(2j * np.pi * j / self.node_count)

    def sample(self, f: Callable[[np.ndarray], np.ndarray]) -> "CircleSampler":
        values = np.asarray(f(self.nodes), dtype=complex)
        _check_finite(values, f"circle |zeta| = {self.radius:.6g}")
        return replace(self, samples=values)


@dataclass(frozen=True, eq=False)
class LaurentCoefficients:
    """
    Coefficients c_k for k = k_min..k_min + len(coeffs) - 1.

    ``coeffs`` has shape (K,) for scalar functions or (K, m) for vector-valued
    ones. ``discarded_bound`` bounds the sup on the sampling circle of the
    part of the function whose indices fell outside the band.
    """

    k_min: int
    coeffs: np.ndarray
    rho_inner: float = 0.0
    rho_outer: float = np.inf
    discarded_bound: float = 0.0

    @property
    def k_max(self) -> int:
        return self.k_min + self.coeffs.shape[0] - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.k_min, self.k_max + 1)

    def coefficient(self, k: int) -> np.ndarray:
        if k < self.k_min or k > self.k_max:
            return np.zeros(self.coeffs.shape[1:], dtype=complex)
        return self.coeffs[k - self.k_min]

    def evaluate(self, zeta) -> np.ndarray:
        zeta = np.atleast_1d(np.asarray(zeta, dtype=complex))
        powers = zeta[:, None] ** self.indices[None, :]
        return powers @ self.coeffs

    def _restricted(self, lo: int, hi: int) -> "LaurentCoefficients":
        lo, hi = max(lo, self.k_min), min(hi, self.k_max)
        if hi < lo:
            return replace(self, k_min=0, coeffs=np.zeros((1,) + self.coeffs.shape[1:], dtype=complex))
        coeffs = self.coeffs[lo - self.k_min:hi - self.k_min + 1].copy()
        return replace(self, k_min=lo, coeffs=coeffs)

    def positive_part(self) -> "LaurentCoefficients":
        """Indices k >= 0 (holomorphic inside the outer circle)"""
        return self._restricted(0, self.k_max)

    def negative_part(self) -> "LaurentCoefficients":
        """Indices k < 0 (holomorphic outside the inner circle, vanishing at infinity)"""
        return self._restricted(self.k_min, -1)

    def trimmed(self, radius: float, relative: float = NOISE_FLOOR) -> "LaurentCoefficients":
        """
        Drop coefficients whose size on |zeta| = radius is below ``relative``
        times the largest one, then shrink the band to the surviving indices.

        Off the sampling circle roundoff in c_k grows like (|zeta| / radius)^|k|,
        so the full FFT band is only usable on the circle itself.
        """
        magnitude = np.abs(self.coeffs) if self.coeffs.ndim == 1 else np.linalg.norm(self.coeffs, axis=1)
        on_circle = magnitude * radius ** self.indices.astype(float)
        peak = float(np.max(on_circle)) if on_circle.size else 0.0
        keep = on_circle > relative * peak
        if not np.any(keep):
            return replace(self, k_min=0, coeffs=np.zeros((1,) + self.coeffs.shape[1:], dtype=complex),
                           discarded_bound=self.discarded_bound + float(np.sum(on_circle)))
        live = np.flatnonzero(keep)
        mask = keep if self.coeffs.ndim == 1 else keep[:, None]
        coeffs = np.where(mask, self.coeffs, 0.0)[live[0]:live[-1] + 1]
        dropped = float(np.sum(on_circle[~keep]))
        return replace(self, k_min=self.k_min + int(live[0]), coeffs=coeffs,
                       discarded_bound=self.discarded_bound + dropped)

    def max_abs(self, lo: int, hi: int, weight: float = 1.0) -> float:
        """max |c_k| * weight**k over lo <= k <= hi"""
        best = 0.0
        for k in range(max(lo, self.k_min), min(hi, self.k_max) + 1):
            best = max(best, float(np.linalg.norm(self.coefficient(k))) * weight ** k)
        return best


def circle_coefficients(f: Optional[Callable[[np.ndarray], np.ndarray]],
                        k_range: Optional[Tuple[int, int]],
                        sampler: CircleSampler) -> LaurentCoefficients:
    """
    Trapezoidal Cauchy coefficients on the circle |zeta| = sampler.radius.

    Args:
        f: Vectorized callable on the nodes; may be None if the sampler already holds samples
        k_range: Inclusive (k_min, k_max); None keeps the full alias-free band
        sampler: Contour description

    Returns:
        LaurentCoefficients with the discarded-band bound filled in

    Raises:
        NonFiniteSample: If any node value is not finite
    """
    n = sampler.node_count
    if sampler.samples is None:
        if f is None:
            raise QuadratureError("circle_coefficients needs either f or stored samples")
        sampler = sampler.sample(f)
    values = np.asarray(sampler.samples, dtype=complex)
    _check_finite(values, f"circle |zeta| = {sampler.radius:.6g}")

    if k_range is None:
        k_range = (-(n // 2), n // 2 - 1)
    k_min, k_max = k_range
    if k_max < k_min or k_max - k_min >= n:
        raise QuadratureError(f"band {k_range} does not fit {n} nodes without aliasing")

    spectrum = np.fft.fft(values, axis=0) / n
    ks = np.arange(k_min, k_max + 1)
    scale = sampler.radius ** (-ks.astype(float))
    if values.ndim > 1:
        scale = scale[:, None]
    coeffs = spectrum[ks % n] * scale

    kept = np.zeros(n, dtype=bool)
    kept[ks % n] = True
    magnitudes = np.abs(spectrum) if values.ndim == 1 else np.linalg.norm(spectrum, axis=1)
    discarded = float(np.sum(magnitudes[~kept]))
    return LaurentCoefficients(k_min, coeffs, sampler.radius, sampler.radius, discarded)


@dataclass(frozen=True, eq=False)
class PolytorusCoefficients:
    """Coefficient table indexed by multi-index alpha - lower"""

    lower: Tuple[int, ...]
    table: np.ndarray
    radii: Tuple[float, ...]

    def coefficient(self, alpha: Sequence[int]) -> np.ndarray:
        idx = tuple(a - lo for a, lo in zip(alpha, self.lower))
        if any(i < 0 or i >= s for i, s in zip(idx, self.table.shape)):
            return np.zeros(self.table.shape[len(self.lower):], dtype=complex)
        return self.table[idx]


def polytorus_coefficients(f: Callable[[np.ndarray], np.ndarray],
                           box: Sequence[Tuple[int, int]],
                           radii: Optional[Sequence[float]] = None,
                           node_count: int = DEFAULT_TORUS_NODES) -> PolytorusCoefficients:
    """
    Tensor-product trapezoidal coefficients on a product of q circles.

    ``f`` takes points of shape (P, q) and returns (P,) or (P, m).
    """
    q = len(box)
    radii = tuple(float(r) for r in (radii if radii is not None else (1.0,) * q))
    for lo, hi in box:
        if hi < lo or hi - lo >= node_count:
            raise QuadratureError(f"band ({lo}, {hi}) does not fit {node_count} nodes")
    angles = np.exp(2j * np.pi * np.arange(node_count) / node_count)
    axes = [r * angles for r in radii]
    grid = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, q)
    values = np.asarray(f(grid), dtype=complex)
    _check_finite(values, f"polytorus with radii {radii}")
    trailing = values.shape[1:]
    values = values.reshape((node_count,) * q + trailing)

    spectrum = np.fft.fftn(values, axes=tuple(range(q))) / node_count ** q
    table = spectrum
    for axis, ((lo, hi), r) in enumerate(zip(box, radii)):
        ks = np.arange(lo, hi + 1)
        table = np.take(table, ks % node_count, axis=axis)
        shape = [1] * table.ndim
        shape[axis] = ks.shape[0]
        table = table * (r ** (-ks.astype(float))).reshape(shape)
    return PolytorusCoefficients(tuple(lo for lo, _ in box), table, radii)


def sample_grid(f: Callable[[np.ndarray], np.ndarray], center: complex,
                spacing: float, size: int) -> np.ndarray:
    """
    Sample ``f`` on a size x size grid centered at ``center``.

    Row j, column i holds f(x_i + i y_j); trailing axes carry vector values.
    """
    offsets = (np.arange(size) - (size - 1) / 2.0) * spacing
    X, Y = np.meshgrid(offsets, offsets)
    points = (center + X + 1j * Y).reshape(-1)
    values = np.asarray(f(points), dtype=complex)
    return values.reshape((size, size) + values.shape[1:])


def cr_residual(samples, spacing: float = 1.0) -> float:
    """
    Max over interior grid points of |d/dzbar| by centered differences.

    ``samples[j, i]`` is the value at x_i + i*y_j. The centered scheme is exact
    for polynomials of degree <= 2 and has O(spacing^2) error otherwise.

    Raises:
        GridTooSmall: If either grid dimension is below 4
    """
    samples = np.asarray(samples, dtype=complex)
    if samples.ndim < 2 or samples.shape[0] < 4 or samples.shape[1] < 4:
        raise GridTooSmall(f"grid {samples.shape[:2]} is smaller than 4x4")
    dx = (samples[1:-1, 2:] - samples[1:-1, :-2]) / (2.0 * spacing)
    dy = (samples[2:, 1:-1] - samples[:-2, 1:-1]) / (2.0 * spacing)
    dbar = 0.5 * (dx + 1j * dy)
    if dbar.ndim > 2:
        magnitude = np.linalg.norm(dbar.reshape(dbar.shape[0], dbar.shape[1], -1), axis=2)
    else:
        magnitude = np.abs(dbar)
    return float(np.max(magnitude))
