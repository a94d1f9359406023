"""
Hartogs figures and extension engines.

A figure H_q^n(r) is the union of B^q x B^n(r) with the shell
A^q(1-r, 1) x B^n (max-norms in the polydisk model). Maps given on a figure
are extended to B^q x B^n by Cauchy integrals along complex lines through
the base point: for a target (z', w) outside the figure, put s = |z'| and
u = z'/s, then

    F(z', w) = (1 / 2 pi i) contour_{|xi| = 1 - r/2} f(xi u, w) / (xi - s) dxi,

where every contour point lies in the shell. The (q, n) engine assembles
this slice by slice, one fibre variable at a time; the (q, inf) engine
slices along the fibre direction w / |w|.

Certification checks Cauchy-Riemann residuals of the input, Laurent
coefficients of fibre slices on a small and a large circle over the shell,
the overlap identity on random figure points, the spectrum of every base
contour (negative modes mean a singularity inside the target) and, for
infinite figures, agreement between slice directions.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from .errors import (
    ConfigError,
    DirectionInconsistency,
    ExtensionError,
    InductionDepthExceeded,
    NonFiniteSample,
    NotHolomorphic,
    OverlapMismatch,
    SlowDecay,
)
from .quadrature import (
    CircleSampler,
    LaurentCoefficients,
    circle_coefficients,
    cr_residual,
    next_power_of_two,
    sample_grid,
)
from .series import DEFAULT_SEED, DEFAULT_TRUNCATION, sphere_samples

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DEFAULT_CR_TOLERANCE = 1e-4
DEFAULT_DECAY_TOLERANCE = 1e-6
DEFAULT_GATEAUX_TOLERANCE = 1e-6
DEFAULT_RANDOM_DIRECTIONS = 8
DEFAULT_OVERLAP_SAMPLES = 100
DEFAULT_MAX_INDUCTION_DEPTH = 4
DEFAULT_BOUNDARY_SAMPLES = 4096

CR_SPACING = 1e-3
CR_GRID = 8
MIN_BASE_NODES = 256
MAX_BASE_NODES = 8192
SHELL_BAND = 32
_CHUNK = 1 << 18

HolomorphicFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class HartogsFigure:
    """
    The figure H_q^n(r); ``n=None`` marks the truncated H_q^inf(r) in C^q x C^M.

    Infinite figures only exist in the ball model.
    """

    q: int
    n: Optional[int]
    r: float
    model: str = 'polydisk'
    truncation: int = DEFAULT_TRUNCATION

    def __post_init__(self):
        if self.q < 1:
            raise ConfigError(f"q must be >= 1, got {self.q}")
        if self.n is not None and self.n < 1:
            raise ConfigError(f"n must be >= 1 or inf, got {self.n}")
        if not 0.0 < self.r < 1.0:
            raise ConfigError(f"r must lie in (0, 1), got {self.r}")
        if self.model not in ('ball', 'polydisk'):
            raise ConfigError(f"model must be 'ball' or 'polydisk', got {self.model!r}")
        if self.n is None:
            if self.model != 'ball':
                raise ConfigError("infinite Hartogs figures use the ball model")
            if self.truncation < 1:
                raise ConfigError(f"truncation must be >= 1, got {self.truncation}")

    @property
    def infinite(self) -> bool:
        return self.n is None

    @property
    def fibre_dim(self) -> int:
        return self.truncation if self.n is None else self.n

    @property
    def dim(self) -> int:
        return self.q + self.fibre_dim

    @property
    def contour_radius(self) -> float:
        """Base contour and large verification circle, (2 - r) / 2"""
        return 1.0 - self.r / 2.0

    @property
    def small_radius(self) -> float:
        return self.r / 2.0

    @property
    def boundary_radius(self) -> float:
        return 1.0 - self.r / 4.0

    def _norm(self, block: np.ndarray) -> np.ndarray:
        if self.model == 'ball':
            return np.linalg.norm(block, axis=1)
        return np.max(np.abs(block), axis=1)

    def base_norm(self, Z) -> np.ndarray:
        Z = np.atleast_2d(Z)
        return self._norm(Z[:, :self.q])

    def fibre_norm(self, Z, fibre_index: Optional[Sequence[int]] = None) -> np.ndarray:
        Z = np.atleast_2d(Z)
        fibre = Z[:, self.q:] if fibre_index is None else Z[:, [self.q + j for j in fibre_index]]
        return self._norm(fibre)

    def contains(self, Z) -> np.ndarray:
        s, t = self.base_norm(Z), self.fibre_norm(Z)
        return ((s < 1.0) & (t < self.r)) | ((s > 1.0 - self.r) & (s < 1.0) & (t < 1.0))

    def in_target(self, Z) -> np.ndarray:
        return (self.base_norm(Z) < 1.0) & (self.fibre_norm(Z) < 1.0)

    def describe(self) -> Dict[str, object]:
        return {'q': self.q, 'n': 'inf' if self.n is None else self.n, 'r': self.r,
                'model': self.model, 'M': self.truncation}


def in_hartogs_infinity_infinity(z1, z2, r: float) -> bool:
    """
    Membership in H_inf^inf(r) = B x B(r) union (B minus closed B(1-r)) x B.

    Arguments may be TruncatedVector (tail bounds widen the norm to an
    interval) or plain arrays. True only when membership holds for every
    l2 point consistent with the truncation.
    """
    def interval(v) -> Tuple[float, float]:
        coords = getattr(v, 'coords', v)
        tail = float(getattr(v, 'tail_bound', 0.0))
        low = float(np.linalg.norm(np.asarray(coords, dtype=complex)))
        return low, math.hypot(low, tail)

    if not 0.0 < r < 1.0:
        raise ConfigError(f"r must lie in (0, 1), got {r}")
    base_low, base_high = interval(z1)
    fibre_low, fibre_high = interval(z2)
    core = base_high < 1.0 and fibre_high < r
    shell = base_low > 1.0 - r and base_high < 1.0 and fibre_high < 1.0
    return core or shell


@dataclass(frozen=True)
class ExtensionSettings:
    tolerance: float = DEFAULT_TOLERANCE
    cr_tolerance: float = DEFAULT_CR_TOLERANCE
    decay_tolerance: float = DEFAULT_DECAY_TOLERANCE
    gateaux_tolerance: float = DEFAULT_GATEAUX_TOLERANCE
    overlap_samples: int = DEFAULT_OVERLAP_SAMPLES
    random_directions: int = DEFAULT_RANDOM_DIRECTIONS
    max_induction_depth: int = DEFAULT_MAX_INDUCTION_DEPTH
    boundary_samples: int = DEFAULT_BOUNDARY_SAMPLES
    node_count: Optional[int] = None
    seed: int = DEFAULT_SEED


@dataclass(frozen=True, eq=False)
class ExtensionResult:
    """Holomorphic extension of a map on a Hartogs figure to B^q x B^n"""

    figure: HartogsFigure
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    out_dim: int
    scalar: bool
    node_count: int
    sup_bound: float
    report: Dict[str, float]
    grid: Optional[np.ndarray] = None
    grid_values: Optional[np.ndarray] = None

    def evaluate(self, Z) -> np.ndarray:
        """
        Evaluate the extension at target points of shape (P, dim) or (dim,).

        Raises:
            ExtensionError: If a point lies outside B^q x B^n
            SlowDecay: If a base contour reveals a singularity inside the target
        """
        Z = np.asarray(Z, dtype=complex)
        single = Z.ndim == 1
        Z = np.atleast_2d(Z)
        if Z.shape[1] != self.figure.dim:
            raise ExtensionError(f"points have dimension {Z.shape[1]}, figure has {self.figure.dim}")
        if not np.all(self.figure.in_target(Z)):
            raise ExtensionError("evaluation point outside the target B^q x B^n")
        values = self.evaluator(Z)
        if self.scalar:
            values = values[:, 0]
        return values[0] if single else values

    def coefficients(self, point, k_range: Tuple[int, int] = (0, SHELL_BAND - 1),
                     radius: Optional[float] = None, node_count: int = 256,
                     fibre_index: Optional[int] = None) -> LaurentCoefficients:
        """
        Laurent coefficients c_k(z') in one fibre variable through ``point``.

        Defaults to the last fibre variable on the large circle (2 - r) / 2.
        """
        point = np.asarray(point, dtype=complex).reshape(-1)
        if fibre_index is None:
            fibre_index = 0 if self.figure.infinite else self.figure.fibre_dim - 1
        radius = self.figure.contour_radius if radius is None else radius
        column = self.figure.q + fibre_index

        def line(t: np.ndarray) -> np.ndarray:
            Z = np.repeat(point[None, :], t.shape[0], axis=0)
            Z[:, column] = t
            return self.evaluate(Z)

        return circle_coefficients(line, k_range, CircleSampler(radius, node_count))

    def summary(self) -> Dict[str, object]:
        data = dict(self.figure.describe())
        data.update({'node_count': self.node_count, 'sup_bound': self.sup_bound})
        data.update(self.report)
        return data


# --- evaluation plumbing -----------------------------------------------------

def _evaluate(f: HolomorphicFunction, Z: np.ndarray) -> np.ndarray:
    values = np.asarray(f(Z), dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    return values.reshape(Z.shape[0], -1)


def _output_shape(f: HolomorphicFunction, figure: HartogsFigure) -> Tuple[int, bool]:
    values = np.asarray(f(np.zeros((1, figure.dim), dtype=complex)), dtype=complex)
    if not np.all(np.isfinite(values)):
        raise NonFiniteSample("input map is not finite at the origin of the figure")
    return (1, True) if values.ndim == 1 else (values.shape[1], False)


def _base_node_count(figure: HartogsFigure, settings: ExtensionSettings) -> int:
    if settings.node_count:
        return settings.node_count
    rho = figure.contour_radius
    rate = max((1.0 - figure.r) / rho, rho)
    needed = 2.0 * math.log(settings.tolerance) / math.log(rate)
    return next_power_of_two(needed, MIN_BASE_NODES, MAX_BASE_NODES)


def _cauchy_base(g: HolomorphicFunction, figure: HartogsFigure, Z: np.ndarray,
                 nodes: int, settings: ExtensionSettings) -> np.ndarray:
    """Cauchy integral over the base line through each target; checks contour spectra"""
    q, d = figure.q, Z.shape[1]
    xi = figure.contour_radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    step = max(1, _CHUNK // nodes)
    blocks = []
    for start in range(0, Z.shape[0], step):
        block = Z[start:start + step]
        s = figure.base_norm(block)
        u = np.zeros((block.shape[0], q), dtype=complex)
        u[:, 0] = 1.0
        nonzero = s > 0
        u[nonzero] = block[nonzero, :q] / s[nonzero, None]

        points = np.repeat(block[:, None, :], nodes, axis=1)
        points[:, :, :q] = xi[None, :, None] * u[:, None, :]
        values = _evaluate(g, points.reshape(-1, d)).reshape(block.shape[0], nodes, -1)
        if not np.all(np.isfinite(values)):
            raise NonFiniteSample("input map is not finite on a base contour in the shell")

        spectrum = np.abs(np.fft.fft(values, axis=1)) / nodes
        scale = np.maximum(np.max(np.abs(values), axis=(1, 2)), 1e-300)
        negative = np.max(spectrum[:, nodes // 2:, :], axis=(1, 2))
        top = np.max(spectrum[:, 3 * nodes // 8:nodes // 2, :], axis=(1, 2))
        ratio = float(np.max(np.maximum(negative, top) / scale))
        if ratio > settings.decay_tolerance:
            raise SlowDecay(f"base contour spectrum decays only to {ratio:.3g}: "
                            f"singularity inside the target")

        weights = xi[None, :] / (xi[None, :] - s[:, None])
        blocks.append(np.mean(values * weights[:, :, None], axis=1))
    return np.concatenate(blocks, axis=0)


def _line_slice_evaluator(f: HolomorphicFunction, figure: HartogsFigure, out_dim: int,
                          nodes: int, settings: ExtensionSettings) -> HolomorphicFunction:
    """Direct slicing: inside the figure use f, elsewhere the base Cauchy integral"""

    def evaluate(Z: np.ndarray) -> np.ndarray:
        values = np.empty((Z.shape[0], out_dim), dtype=complex)
        inside = figure.contains(Z)
        if np.any(inside):
            values[inside] = _evaluate(f, Z[inside])
        if not np.all(inside):
            values[~inside] = _cauchy_base(f, figure, Z[~inside], nodes, settings)
        return values

    return evaluate


def _fibre_slice_evaluator(g: HolomorphicFunction, figure: HartogsFigure,
                           fibre_index: Sequence[int], out_dim: int, nodes: int,
                           settings: ExtensionSettings) -> HolomorphicFunction:
    """
    Extension over (z', w[fibre_index]) with the remaining fibre variables as parameters.

    Only used in the polydisk model.
    """
    r = figure.r

    def evaluate(Z: np.ndarray) -> np.ndarray:
        s = figure.base_norm(Z)
        t = figure.fibre_norm(Z, fibre_index)
        inside = (t < r) | (s > 1.0 - r)
        values = np.empty((Z.shape[0], out_dim), dtype=complex)
        if np.any(inside):
            values[inside] = _evaluate(g, Z[inside])
        if not np.all(inside):
            values[~inside] = _cauchy_base(g, figure, Z[~inside], nodes, settings)
        return values

    return evaluate


def _induction_evaluator(f: HolomorphicFunction, figure: HartogsFigure,
                         fibre_index: Sequence[int], out_dim: int, nodes: int,
                         settings: ExtensionSettings) -> HolomorphicFunction:
    """
    Two-stage induction on the number of fibre variables.

    Stage one extends along slices with all but the last fibre variable fixed,
    from H_q^n(r) to E = H_q^(n-1)(r) x disk. Stage two extends that map from
    E to the polydisk by the same construction with one variable fewer.
    """
    if len(fibre_index) == 1:
        return _fibre_slice_evaluator(f, figure, fibre_index, out_dim, nodes, settings)
    stage_one = _fibre_slice_evaluator(f, figure, fibre_index[-1:], out_dim, nodes, settings)
    return _induction_evaluator(stage_one, figure, fibre_index[:-1], out_dim, nodes, settings)


# --- certification -----------------------------------------------------------

def _unit_vectors(rng: np.random.Generator, count: int, dim: int, model: str) -> np.ndarray:
    Z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    if model == 'ball':
        return Z / np.linalg.norm(Z, axis=1, keepdims=True)
    return Z / np.max(np.abs(Z), axis=1, keepdims=True)


def _distinguished_boundary_sup(f: HolomorphicFunction, figure: HartogsFigure,
                                settings: ExtensionSettings) -> float:
    """Max of |f| over the distinguished boundary at radius 1 - r/4, refined by local ascent"""
    q, k = figure.q, figure.fibre_dim
    rho = figure.boundary_radius
    count = settings.boundary_samples

    if figure.model == 'polydisk':
        sampler = qmc.Sobol(d=q + k, scramble=True, seed=settings.seed)
        angles = 2.0 * np.pi * sampler.random_base2(max(1, math.ceil(math.log2(count))))[:count]

        def point(y: np.ndarray) -> np.ndarray:
            return rho * np.exp(1j * y)

        starts = angles
    else:
        base = sphere_samples(count, q, settings.seed)
        fibre = sphere_samples(count, k, settings.seed + 1)

        def point(y: np.ndarray) -> np.ndarray:
            b = y[:q] + 1j * y[q:2 * q]
            v = y[2 * q:2 * q + k] + 1j * y[2 * q + k:]
            return rho * np.concatenate([b / np.linalg.norm(b), v / np.linalg.norm(v)])

        starts = np.hstack([base.real, base.imag, fibre.real, fibre.imag])

    Z = np.array([point(y) for y in starts])
    magnitudes = np.linalg.norm(_evaluate(f, Z), axis=1)
    best = int(np.argmax(magnitudes))

    def objective(y: np.ndarray) -> float:
        return -float(np.linalg.norm(_evaluate(f, point(y)[None, :])[0]))

    refined = optimize.minimize(objective, starts[best], method='Nelder-Mead',
                                options={'maxiter': 2000, 'xatol': 1e-10, 'fatol': 1e-15})
    ascended = -float(refined.fun) if np.isfinite(refined.fun) else 0.0
    return max(float(magnitudes[best]), ascended)


def _cr_gate(f: HolomorphicFunction, figure: HartogsFigure, scale: float,
             settings: ExtensionSettings) -> float:
    """Cauchy-Riemann residual of f on fibre slices over the shell and base slices at w = 0"""
    q, d, r = figure.q, figure.dim, figure.r
    worst = 0.0

    def slice_fn(anchor: np.ndarray, column: int) -> HolomorphicFunction:
        def fn(points: np.ndarray) -> np.ndarray:
            Z = np.repeat(anchor[None, :], points.shape[0], axis=0)
            Z[:, column] = points
            return _evaluate(f, Z)
        return fn

    shell_anchor = np.zeros(d, dtype=complex)
    shell_anchor[0] = 1.0 - r / 2.0
    for j in range(min(figure.fibre_dim, 4)):
        samples = sample_grid(slice_fn(shell_anchor, q + j), 0.0, CR_SPACING, CR_GRID)
        worst = max(worst, cr_residual(samples, CR_SPACING))
    for i in range(min(q, 4)):
        samples = sample_grid(slice_fn(np.zeros(d, dtype=complex), i), 0.5 * (1.0 - r),
                              CR_SPACING, CR_GRID)
        worst = max(worst, cr_residual(samples, CR_SPACING))

    normalized = worst / scale
    logger.debug(f"CR residual of input: {normalized:.3e}")
    if normalized > settings.cr_tolerance:
        raise NotHolomorphic(f"Cauchy-Riemann residual {normalized:.3e} exceeds "
                             f"{settings.cr_tolerance:.1e}")
    return normalized


def _shell_coefficients(f: HolomorphicFunction, figure: HartogsFigure, nodes: int,
                        scale: float, settings: ExtensionSettings) -> Tuple[float, float]:
    """
    Compare fibre-slice coefficients over the shell on the circles r/2 and (2 - r)/2.

    Returns (weighted mismatch, largest negative coefficient), both relative to scale.
    """
    q, d, k = figure.q, figure.dim, figure.fibre_dim
    base_dirs = [np.eye(q, dtype=complex)[0]]
    if q > 1:
        ones = np.ones(q, dtype=complex)
        base_dirs.append(ones / (np.linalg.norm(ones) if figure.model == 'ball' else 1.0))
    fibre_dirs = [np.eye(k, dtype=complex)[0]]
    if k > 1:
        fibre_dirs.append(np.ones(k, dtype=complex) / math.sqrt(k))

    small_r, big_r = figure.small_radius, figure.contour_radius
    mismatch, negative = 0.0, 0.0
    for b in base_dirs:
        for v in fibre_dirs:
            anchor = np.concatenate([(1.0 - figure.r / 2.0) * b, np.zeros(k, dtype=complex)])

            def line(t: np.ndarray) -> np.ndarray:
                Z = np.repeat(anchor[None, :], t.shape[0], axis=0)
                Z[:, q:] += t[:, None] * v[None, :]
                return _evaluate(f, Z)

            small = circle_coefficients(line, (0, SHELL_BAND - 1), CircleSampler(small_r, 2 * SHELL_BAND))
            big = circle_coefficients(line, None, CircleSampler(big_r, nodes))
            for j in range(SHELL_BAND):
                gap = np.linalg.norm(small.coefficient(j) - big.coefficient(j)) * small_r ** j
                mismatch = max(mismatch, float(gap) / scale)
            negative = max(negative, big.max_abs(big.k_min, -1, weight=big_r) / scale)

    logger.debug(f"shell coefficients: mismatch {mismatch:.3e}, negative {negative:.3e}")
    if negative > settings.tolerance:
        raise SlowDecay(f"negative Laurent coefficients {negative:.3e} on the outer circle: "
                        f"singularity inside the fibre disk")
    if mismatch > settings.tolerance:
        raise OverlapMismatch(f"small and large circle coefficients differ by {mismatch:.3e}")
    return mismatch, negative


def _overlap_residual(f: HolomorphicFunction, figure: HartogsFigure, nodes: int,
                      scale: float, settings: ExtensionSettings) -> float:
    """Max |Cauchy reconstruction - f| on random points of the figure, relative to scale"""
    rng = np.random.default_rng(settings.seed)
    q, k, r = figure.q, figure.fibre_dim, figure.r
    count = settings.overlap_samples
    inner = count // 2
    outer = count - inner

    base_dirs = _unit_vectors(rng, count, q, figure.model)
    fibre_dirs = _unit_vectors(rng, count, k, 'ball' if figure.infinite else figure.model)
    s = np.concatenate([rng.uniform(0.0, 1.0 - r, inner),
                        rng.uniform(1.0 - 0.95 * r, 1.0 - 0.75 * r, outer)])
    t = np.concatenate([rng.uniform(0.0, 0.9 * r, inner), rng.uniform(0.0, 0.9, outer)])
    Z = np.hstack([s[:, None] * base_dirs, t[:, None] * fibre_dirs])

    reconstructed = _cauchy_base(f, figure, Z, nodes, settings)
    direct = _evaluate(f, Z)
    residual = float(np.max(np.linalg.norm(reconstructed - direct, axis=1))) / scale
    logger.debug(f"overlap residual on {count} figure points: {residual:.3e}")
    if residual > settings.tolerance:
        raise OverlapMismatch(f"extension differs from input by {residual:.3e} on the figure")
    return residual


def _oscillation(evaluator: HolomorphicFunction, figure: HartogsFigure, grid: np.ndarray,
                 sup_bound: float, scale: float, settings: ExtensionSettings) -> float:
    """
    Oscillation between neighbouring slices of the last fibre variable.

    Returns the worst ratio to the Cauchy-estimate Lipschitz bound; raises
    OverlapMismatch above 1.
    """
    delta = 1e-3
    rho = figure.boundary_radius
    column = figure.dim - 1
    keep = (np.abs(grid[:, column]) + delta < rho) & (figure.base_norm(grid) < rho)
    if not np.any(keep):
        return 0.0
    points = grid[keep]
    shifted = points.copy()
    shifted[:, column] += delta
    jump = np.linalg.norm(evaluator(shifted) - evaluator(points), axis=1)
    bound = delta * sup_bound / (rho - np.abs(points[:, column]) - delta)
    ratio = float(np.max(jump / (bound * (1.0 + 1e-6) + settings.tolerance * scale)))
    if ratio > 1.0:
        raise OverlapMismatch(f"extension oscillates {ratio:.3g}x beyond the Cauchy estimate "
                              f"between neighbouring slices")
    return ratio


def _default_grid(figure: HartogsFigure) -> np.ndarray:
    q, k = figure.q, figure.fibre_dim
    radii = np.linspace(0.0, 0.8, 5)
    rows = []
    for a in radii:
        for b in radii:
            z = np.zeros(q + k, dtype=complex)
            z[0] = a
            z[q:] = b * np.exp(0.7j) / (math.sqrt(k) if figure.model == 'ball' else 1.0)
            rows.append(z)
    return np.array(rows)


def _build_result(f: HolomorphicFunction, figure: HartogsFigure, evaluator: HolomorphicFunction,
                  out_dim: int, scalar: bool, nodes: int, settings: ExtensionSettings,
                  eval_grid, kind: str) -> ExtensionResult:
    sup_bound = _distinguished_boundary_sup(f, figure, settings)
    scale = max(1.0, sup_bound)
    report: Dict[str, float] = {}
    report['cr_residual'] = _cr_gate(f, figure, scale, settings)
    report['shell_mismatch'], report['negative_coefficient_max'] = _shell_coefficients(
        f, figure, nodes, scale, settings)
    report['overlap_residual'] = _overlap_residual(f, figure, nodes, scale, settings)

    grid = grid_values = None
    if eval_grid is not None:
        grid = np.atleast_2d(np.asarray(eval_grid, dtype=complex))
        if not np.all(figure.in_target(grid)):
            raise ExtensionError("eval_grid contains points outside the target")
        grid_values = evaluator(grid)
        if scalar:
            grid_values = grid_values[:, 0]

    result = ExtensionResult(figure, evaluator, out_dim, scalar, nodes, sup_bound, report,
                             grid, grid_values)
    logger.info(f"{kind} extension: q={figure.q} n={figure.describe()['n']} r={figure.r} "
                f"nodes={nodes} sup={sup_bound:.6g} overlap={report['overlap_residual']:.2e}")
    return result


# --- engines -----------------------------------------------------------------

def extend_bidim_q1(f: HolomorphicFunction, figure: HartogsFigure, eval_grid=None,
                    settings: Optional[ExtensionSettings] = None) -> ExtensionResult:
    """
    Extend a map from H_q^1(r) to B^q x disk.

    Args:
        f: Vectorized map; points (P, q + 1) -> values (P,) or (P, m)
        figure: Figure with n == 1
        eval_grid: Optional target points evaluated into the result
        settings: Tolerances and sampling parameters

    Raises:
        NotHolomorphic: Input fails the Cauchy-Riemann gate
        OverlapMismatch: Extension and input disagree on the figure
        SlowDecay: Coefficients reveal a singularity inside the target
    """
    settings = settings or ExtensionSettings()
    if figure.n != 1:
        raise ExtensionError(f"extend_bidim_q1 needs n = 1, got {figure.describe()['n']}")
    out_dim, scalar = _output_shape(f, figure)
    nodes = _base_node_count(figure, settings)
    evaluator = _line_slice_evaluator(f, figure, out_dim, nodes, settings)
    return _build_result(f, figure, evaluator, out_dim, scalar, nodes, settings, eval_grid, 'q1')


def extend_bidim_qn(f: HolomorphicFunction, figure: HartogsFigure, eval_grid=None,
                    settings: Optional[ExtensionSettings] = None) -> ExtensionResult:
    """
    Extend a map from H_q^n(r) to B^q x B^n.

    n = 1 goes straight to extend_bidim_q1. The polydisk model runs the
    slice induction over fibre variables; the ball model slices along the
    complex line through the base point, whose contour stays in the shell
    for every fibre point of the unit ball. Continuity of the assembled map
    is certified on ``eval_grid`` by the oscillation check.

    Raises:
        InductionDepthExceeded: If n is above the configured induction depth
    """
    settings = settings or ExtensionSettings()
    if figure.infinite:
        raise ExtensionError("use extend_q_infty for infinite figures")
    if figure.n == 1:
        return extend_bidim_q1(f, figure, eval_grid, settings)
    if figure.n > settings.max_induction_depth:
        raise InductionDepthExceeded(f"n = {figure.n} exceeds induction depth "
                                     f"{settings.max_induction_depth}")

    out_dim, scalar = _output_shape(f, figure)
    nodes = _base_node_count(figure, settings)
    if figure.model == 'polydisk':
        evaluator = _induction_evaluator(f, figure, list(range(figure.n)), out_dim, nodes, settings)
    else:
        evaluator = _line_slice_evaluator(f, figure, out_dim, nodes, settings)
    result = _build_result(f, figure, evaluator, out_dim, scalar, nodes, settings, eval_grid, 'qn')

    grid = result.grid if result.grid is not None else _default_grid(figure)
    result.report['oscillation_ratio'] = _oscillation(
        evaluator, figure, grid, result.sup_bound, max(1.0, result.sup_bound), settings)
    return result


def gateaux_derivative(result: ExtensionResult, point, direction, radius: float = 0.05,
                       nodes: int = 32) -> np.ndarray:
    """Directional derivative d/dt F(point + t v) at t = 0 from the Cauchy first coefficient"""
    point = np.asarray(point, dtype=complex).reshape(-1)
    direction = np.asarray(direction, dtype=complex).reshape(-1)
    omega = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    Z = point[None, :] + radius * omega[:, None] * direction[None, :]
    values = result.evaluator(Z)
    return np.mean(values * np.conj(omega)[:, None], axis=0) / radius


def _finite_difference(result: ExtensionResult, point: np.ndarray, direction: np.ndarray,
                       h: float = 1e-4) -> np.ndarray:
    Z = np.array([point + h * direction, point - h * direction])
    values = result.evaluator(Z)
    return (values[0] - values[1]) / (2.0 * h)


def extend_q_infty(f: HolomorphicFunction, figure: HartogsFigure, eval_grid=None,
                   settings: Optional[ExtensionSettings] = None) -> ExtensionResult:
    """
    Extend a map from the truncated H_q^inf(r) to B^q x B^M.

    Each target (z', w) is reached through the slice spanned by C^q and
    v = w / |w|. Slices along the coordinate frame plus seeded random
    directions must agree on C^q x {0}, and directional derivatives from
    the Cauchy formula must match centered differences.

    Raises:
        DirectionInconsistency: If slice directions or derivatives disagree
    """
    settings = settings or ExtensionSettings()
    if not figure.infinite:
        raise ExtensionError("extend_q_infty needs an infinite figure")
    out_dim, scalar = _output_shape(f, figure)
    nodes = _base_node_count(figure, settings)
    evaluator = _line_slice_evaluator(f, figure, out_dim, nodes, settings)
    result = _build_result(f, figure, evaluator, out_dim, scalar, nodes, settings, eval_grid, 'q-inf')
    scale = max(1.0, result.sup_bound)

    q, M, r = figure.q, figure.fibre_dim, figure.r
    rng = np.random.default_rng(settings.seed)
    directions = np.vstack([np.eye(M, dtype=complex),
                            _unit_vectors(rng, settings.random_directions, M, 'ball')])

    circle_nodes, circle_radius = 64, 0.4
    omega = circle_radius * np.exp(2j * np.pi * np.arange(circle_nodes) / circle_nodes)
    spread = 0.0
    for base_value in (0.0, 0.5 * (1.0 - r)):
        base = np.zeros(q, dtype=complex)
        base[0] = base_value
        Z = np.zeros((directions.shape[0], circle_nodes, q + M), dtype=complex)
        Z[:, :, :q] = base
        Z[:, :, q:] = omega[None, :, None] * directions[:, None, :]
        values = evaluator(Z.reshape(-1, q + M)).reshape(directions.shape[0], circle_nodes, -1)
        constant_terms = np.mean(values, axis=1)
        anchor = _evaluate(f, np.concatenate([base, np.zeros(M, dtype=complex)])[None, :])[0]
        spread = max(spread, float(np.max(np.linalg.norm(constant_terms - anchor, axis=1))) / scale)
    if spread > settings.tolerance:
        raise DirectionInconsistency(f"slice directions disagree on C^q x {{0}} by {spread:.3e}")

    mismatch = 0.0
    samples = [np.zeros(q + M, dtype=complex), np.zeros(q + M, dtype=complex)]
    samples[1][0] = 0.5 * (1.0 - r)
    samples[1][q] = 0.3
    tangents = [np.eye(q + M, dtype=complex)[q], np.concatenate([np.zeros(q), directions[M]]),
              np.eye(q + M, dtype=complex)[0]]
    for point in samples:
        for v in tangents:
            cauchy = gateaux_derivative(result, point, v)
            difference = _finite_difference(result, point, v)
            mismatch = max(mismatch, float(np.linalg.norm(cauchy - difference)) / scale)
    if mismatch > settings.gateaux_tolerance:
        raise DirectionInconsistency(f"directional derivatives disagree with finite "
                                     f"differences by {mismatch:.3e}")

    result.report['direction_spread'] = spread
    result.report['gateaux_mismatch'] = mismatch
    result.report['directions'] = float(directions.shape[0])
    logger.info(f"q-inf slices: {directions.shape[0]} directions, spread {spread:.2e}, "
                f"Gateaux mismatch {mismatch:.2e}")
    return result


def extend_bidim(f: HolomorphicFunction, figure: HartogsFigure, eval_grid=None,
                 settings: Optional[ExtensionSettings] = None) -> ExtensionResult:
    """Pick the engine matching the figure's shape"""
    if figure.infinite:
        return extend_q_infty(f, figure, eval_grid, settings)
    if figure.n == 1:
        return extend_bidim_q1(f, figure, eval_grid, settings)
    return extend_bidim_qn(f, figure, eval_grid, settings)
