"""
Loops in W^{k,2}(S^1, C^N) by their Fourier coefficients.

A loop f(s) = sum_m c_m e^{ims} has Sobolev norm
(sum_m (1 + |m|)^{2k} |c_m|^2)^{1/2}. A family of loops depending
holomorphically on z is a holomorphic map into loop space exactly when every
coefficient c_m(z) is holomorphic and the weighted tails are summable, so
such families are extended from a Hartogs figure one mode at a time and
the result is certified by the maximum principle for the Sobolev norm.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import qmc

from .errors import HartogsKitError, LoopError, LoopEscapesBall, NormBlowup
from .hartogs import ExtensionResult, ExtensionSettings, HartogsFigure, extend_bidim
from .series import DEFAULT_SEED, sphere_samples
from .utils import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_MODES = 32
DEFAULT_LOOP_NODES = 128
DEFAULT_CERTIFICATE_SAMPLES = 1024
MAXIMUM_SLACK = 1e-6


def check_smoothness(k: int, dim_s: int = 1) -> None:
    """
    Loops of W^{k,2} on an S of dimension dim_s are continuous only for k >= dim_s.

    Raises:
        LoopError: If k is not an integer or is below dim_s
    """
    if int(k) != k:
        raise LoopError(f"smoothness order must be an integer, got {k}")
    if k < dim_s:
        raise LoopError(f"W^{{{k},2}} loops on a {dim_s}-dimensional S need k >= {dim_s}")


def _weights(modes: np.ndarray, k: int) -> np.ndarray:
    return (1.0 + np.abs(modes)) ** (2 * k)


@dataclass(frozen=True, eq=False)
class SobolevLoop:
    """
    Coefficients c_m for m = -mode_count..mode_count, shape (2 * mode_count + 1, N).

    ``tail_bound`` bounds the W^{k,2} norm of the dropped modes.
    """

    coeffs: np.ndarray
    k: int = 1
    tail_bound: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        if coeffs.ndim != 2 or coeffs.shape[0] % 2 == 0:
            raise LoopError(f"loop coefficients need shape (2M + 1, N), got {coeffs.shape}")
        if self.k < 0:
            raise LoopError(f"smoothness order must be nonnegative, got {self.k}")
        object.__setattr__(self, 'coeffs', coeffs)

    @classmethod
    def from_modes(cls, modes: Dict[int, Sequence[complex]], dim: int, k: int = 1,
                   mode_count: Optional[int] = None) -> "SobolevLoop":
        mode_count = mode_count if mode_count is not None else max([abs(m) for m in modes] + [0])
        coeffs = np.zeros((2 * mode_count + 1, dim), dtype=complex)
        for m, value in modes.items():
            coeffs[m + mode_count] = value
        return cls(coeffs, k)

    @property
    def mode_count(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.mode_count, self.mode_count + 1)

    def coefficient(self, m: int) -> np.ndarray:
        if abs(m) > self.mode_count:
            return np.zeros(self.dim, dtype=complex)
        return self.coeffs[m + self.mode_count]

    def evaluate(self, s) -> np.ndarray:
        return evaluate_loop(self, s)


def sobolev_norm(loop: SobolevLoop) -> float:
    """(sum_m (1 + |m|)^{2k} |c_m|^2)^{1/2}"""
    mass = np.sum(np.abs(loop.coeffs) ** 2, axis=1)
    return float(math.sqrt(np.sum(_weights(loop.modes, loop.k) * mass)))


def evaluate_loop(loop: SobolevLoop, s) -> np.ndarray:
    """Values f(s) of shape (P, N) at angles s"""
    s = np.asarray(s, dtype=float).reshape(-1)
    return np.exp(1j * s[:, None] * loop.modes[None, :]) @ loop.coeffs


def loop_from_samples(values: np.ndarray, k: int = 1,
                      mode_count: int = DEFAULT_MODES) -> SobolevLoop:
    """
    Fourier coefficients of a loop sampled at s_j = 2 pi j / S.

    Modes beyond ``mode_count`` (up to the Nyquist band) are dropped and
    their weighted norm becomes the tail bound.
    """
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    S = values.shape[0]
    if 2 * mode_count + 1 > S:
        raise LoopError(f"{S} samples cannot resolve {mode_count} modes")
    spectrum = np.fft.fft(values, axis=0) / S
    modes = np.arange(-mode_count, mode_count + 1)
    coeffs = spectrum[modes % S]
    everything = np.fft.fftfreq(S, 1.0 / S).astype(int)
    dropped = np.abs(everything) > mode_count
    tail = float(math.sqrt(np.sum(_weights(everything[dropped], k)
                                  * np.sum(np.abs(spectrum[dropped]) ** 2, axis=1))))
    return SobolevLoop(coeffs, k, tail)


def l2_norm_trapezoid(f: Callable[[np.ndarray], np.ndarray], nodes: int = DEFAULT_LOOP_NODES) -> float:
    """((1 / 2 pi) int_0^{2 pi} |f(s)|^2 ds)^{1/2} by the trapezoidal rule"""
    s = 2.0 * np.pi * np.arange(nodes) / nodes
    values = np.asarray(f(s), dtype=complex).reshape(nodes, -1)
    return float(math.sqrt(np.mean(np.sum(np.abs(values) ** 2, axis=1))))


# --- holomorphic families of loops ------------------------------------------------------

HolomorphicFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class LoopFamily:
    """
    z -> F(z, .) given by coefficient functions c_m(z), each (P, q + n) -> (P, N).

    Modes that are not listed vanish identically.
    """

    modes: Dict[int, HolomorphicFunction]
    dim: int
    figure: HartogsFigure
    k: int = 1

    def coefficients(self, Z) -> Tuple[np.ndarray, np.ndarray]:
        """(mode list, values of shape (P, modes, N))"""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        order = np.array(sorted(self.modes))
        values = np.stack([np.asarray(self.modes[m](Z), dtype=complex).reshape(Z.shape[0], self.dim)
                           for m in order], axis=1)
        return order, values

    def sobolev_at(self, Z) -> np.ndarray:
        order, values = self.coefficients(Z)
        return _pointwise_norm(order, values, self.k)


def _pointwise_norm(order: np.ndarray, values: np.ndarray, k: int) -> np.ndarray:
    mass = np.sum(np.abs(values) ** 2, axis=2)
    return np.sqrt(mass @ _weights(order, k))


@dataclass(frozen=True, eq=False)
class ExtendedLoopFamily:
    """Mode-wise extension to the full product together with its norm certificate"""

    extensions: Dict[int, ExtensionResult]
    dim: int
    figure: HartogsFigure
    k: int
    boundary_max: float
    interior_max: float
    modulus: float
    tail_ratio: float

    def coefficients(self, Z) -> Tuple[np.ndarray, np.ndarray]:
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        order = np.array(sorted(self.extensions))
        values = np.stack([np.asarray(self.extensions[m].evaluate(Z), dtype=complex).reshape(Z.shape[0], self.dim)
                           for m in order], axis=1)
        return order, values

    def sobolev_at(self, Z) -> np.ndarray:
        order, values = self.coefficients(Z)
        return _pointwise_norm(order, values, self.k)

    def loop_at(self, z) -> SobolevLoop:
        order, values = self.coefficients(np.asarray(z, dtype=complex).reshape(1, -1))
        return SobolevLoop.from_modes({int(m): values[0, i] for i, m in enumerate(order)}, self.dim, self.k)


def _boundary_points(figure: HartogsFigure, radius: float, count: int, seed: int) -> np.ndarray:
    """Points on the Shilov boundary of the product of radius-``radius`` balls or polydisks"""
    q, n = figure.q, figure.fibre_dim
    if figure.model == 'polydisk':
        sampler = qmc.Sobol(d=q + n, scramble=True, seed=seed)
        angles = 2.0 * np.pi * sampler.random_base2(max(1, math.ceil(math.log2(count))))[:count]
        return radius * np.exp(1j * angles)
    base = sphere_samples(count, q, seed=seed)
    fibre = sphere_samples(count, n, seed=seed + 1)
    return radius * np.hstack([base, fibre])


def _interior_grid(figure: HartogsFigure, radius: float, count: int, seed: int) -> np.ndarray:
    d = figure.dim
    sampler = qmc.Sobol(d=2 * d, scramble=True, seed=seed)
    u = sampler.random_base2(max(1, math.ceil(math.log2(count))))[:count]
    Z = 0.9 * radius * np.sqrt(u[:, :d]) * np.exp(2j * np.pi * u[:, d:])
    if figure.model == 'ball':
        Z[:, :figure.q] /= math.sqrt(figure.q)
        Z[:, figure.q:] /= math.sqrt(figure.fibre_dim)
    return Z


def extend_loop_family(family: LoopFamily, eval_grid=None,
                       settings: Optional[ExtensionSettings] = None, threads: int = 1,
                       boundary_samples: int = DEFAULT_CERTIFICATE_SAMPLES) -> ExtendedLoopFamily:
    """
    Extend every coefficient c_m from the figure to the full product.

    The extension is certified by the maximum principle: on the product of
    radius-(1 - r/4) sets the Sobolev norm at each grid point is bounded by
    its sampled maximum over the Shilov boundary.

    Raises:
        ExtensionError: From a single mode, tagged with m
        NormBlowup: If an interior norm exceeds the boundary maximum
    """
    check_smoothness(family.k)
    settings = settings or ExtensionSettings()
    figure = family.figure
    order = sorted(family.modes)

    def extend_mode(m: int) -> ExtensionResult:
        try:
            return extend_bidim(family.modes[m], figure, settings=settings)
        except HartogsKitError as e:
            raise type(e)(f"mode m={m}: {e}") from e

    results = dict(zip(order, parallel_map(extend_mode, order, threads)))
    partial = ExtendedLoopFamily(results, family.dim, figure, family.k, 0.0, 0.0, 0.0, 0.0)

    radius = figure.boundary_radius
    boundary = _boundary_points(figure, radius, boundary_samples, settings.seed)
    boundary_max = float(np.max(partial.sobolev_at(boundary)))
    grid = (np.atleast_2d(np.asarray(eval_grid, dtype=complex)) if eval_grid is not None
            else _interior_grid(figure, radius, 64, settings.seed))
    norms = partial.sobolev_at(grid)
    interior_max = float(np.max(norms))
    if interior_max > boundary_max * (1.0 + MAXIMUM_SLACK):
        worst = grid[int(np.argmax(norms))]
        raise NormBlowup(f"Sobolev norm {interior_max:.6g} at {np.round(worst, 6).tolist()} "
                         f"exceeds the boundary maximum {boundary_max:.6g}")

    modes, values = partial.coefficients(grid)
    flat = values * np.sqrt(_weights(modes, family.k))[None, :, None]
    flat = flat.reshape(grid.shape[0], -1)
    gaps = np.linalg.norm(flat[:, None, :] - flat[None, :, :], axis=2)
    distance = np.linalg.norm(grid[:, None, :] - grid[None, :, :], axis=2)
    off = distance > 0
    modulus = float(np.max(gaps[off] / distance[off])) if np.any(off) else 0.0

    high = np.abs(modes) > max(abs(int(m)) for m in modes) / 2 if len(modes) > 1 else np.zeros(1, bool)
    tail = np.sqrt(np.sum((np.abs(values[:, high, :]) ** 2).sum(axis=2) * _weights(modes[high], family.k),
                          axis=1))
    tail_ratio = float(np.max(tail / np.maximum(norms, 1e-300)))

    logger.info(f"loop family: {len(order)} mode(s), boundary max {boundary_max:.6g}, "
                f"interior max {interior_max:.6g}, modulus {modulus:.4g}")
    return ExtendedLoopFamily(results, family.dim, figure, family.k, boundary_max, interior_max,
                              modulus, tail_ratio)


# --- the Mobius disk family ------------------------------------------------------------

def ball_automorphism(a, z) -> np.ndarray:
    """
    The involutive automorphism of the unit ball exchanging a and 0.

    h_a(z) = (a - P_a z - s_a Q_a z) / (1 - <z, a>) with s_a = sqrt(1 - |a|^2),
    P_a the projection onto a and Q_a = I - P_a; for q = 1 this is
    (a - z) / (1 - conj(a) z).
    """
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    a, z = np.broadcast_arrays(a, z)
    norm2 = np.sum(np.abs(a) ** 2, axis=1, keepdims=True)
    inner = np.sum(z * a.conj(), axis=1, keepdims=True)
    safe = np.where(norm2 > 0, norm2, 1.0)
    projected = np.where(norm2 > 0, inner / safe * a, 0.0)
    s = np.sqrt(1.0 - norm2)
    return (a - projected - s * (z - projected)) / (1.0 - inner)


@dataclass(frozen=True, eq=False)
class MobiusDiskFamily:
    """
    phi_t(z, s) = (h_{f^q(s)}(z), t f^n(s)): at t = 1 the disk through the
    loop f = (f^q, f^n) at z = 0, at t = 0 a disk inside B^q x {0}.
    """

    base_loop: SobolevLoop
    fibre_loop: SobolevLoop
    grid: np.ndarray
    nodes: int = DEFAULT_LOOP_NODES
    shell: float = 0.0

    @property
    def q(self) -> int:
        return self.base_loop.dim

    def phi(self, t: float, z, s) -> np.ndarray:
        """Points of shape (P, q + n) for paired z (P, q) and s (P,)"""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        s = np.asarray(s, dtype=float).reshape(-1)
        a = self.base_loop.evaluate(s)
        return np.hstack([ball_automorphism(a, z), t * self.fibre_loop.evaluate(s)])

    def loop_at(self, t: float, z, k: int = 1, mode_count: int = DEFAULT_MODES) -> SobolevLoop:
        """The loop s -> phi_t(z, s)"""
        s = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        z = np.broadcast_to(np.atleast_2d(np.asarray(z, dtype=complex)), (self.nodes, self.q))
        return loop_from_samples(self.phi(t, z, s), k, min(mode_count, (self.nodes - 1) // 2))


def mobius_disk_family(base_loop: SobolevLoop, fibre_loop: SobolevLoop, grid=None,
                       nodes: int = DEFAULT_LOOP_NODES) -> MobiusDiskFamily:
    """
    Build the disk family through a loop in B^q x B^n.

    ``shell`` reports the largest deviation of |h_a(z)| from 1 over the
    sampled boundary |z| = 1, so boundary disks sit in A(1 - shell, 1 + shell).

    Raises:
        LoopEscapesBall: If either loop leaves its open unit ball at a sampled s
    """
    s = 2.0 * np.pi * np.arange(nodes) / nodes
    for name, loop in (('f^q', base_loop), ('f^n', fibre_loop)):
        peak = float(np.max(np.linalg.norm(loop.evaluate(s), axis=1)))
        if not peak < 1.0:
            raise LoopEscapesBall(f"{name} reaches norm {peak:.6g} >= 1")
    grid = np.linspace(0.0, 1.0, 5) if grid is None else np.asarray(grid, dtype=float)

    q = base_loop.dim
    circle = sphere_samples(32, q, seed=DEFAULT_SEED) if q > 1 else np.exp(
        2j * np.pi * np.arange(32) / 32)[:, None]
    a = base_loop.evaluate(s)
    deviation = 0.0
    for point in circle:
        images = ball_automorphism(a, np.broadcast_to(point, a.shape))
        deviation = max(deviation, float(np.max(np.abs(np.linalg.norm(images, axis=1) - 1.0))))
    return MobiusDiskFamily(base_loop, fibre_loop, grid, nodes, deviation)
