"""
Holomorphic tubular neighborhoods of embedded disks.

An embedded disk is first straightened locally (``straighten_chart``). Over
the annulus covering of the closed disk, chart transitions are then brought
to the identity degree by degree in the normal variables: the linear part by
factoring a matrix-valued cocycle, every higher degree by an additive Cousin
problem. The accumulated coordinate changes, composed with the ambient chart
maps, glue into one map from a product neighborhood into the ambient space.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm, logm

from .csvio import read_jet_csv, write_jet_csv
from .dbar import AdditiveCocycle, Cover, CousinSolution, laurent_split_cover, solve_cousin
from .errors import (ChartDisagreement, InsufficientTerms, NotImmersion, NotNearIdentity,
                     RadiusCollapse, RoydenError)
from .jets import DEFAULT_BAND, DEFAULT_DEGREE, JetMap, JetSpace, jet_space, laurent_band
from .quadrature import CircleSampler, LaurentCoefficients, circle_coefficients
from .series import (HomogeneousMap, PowerSeriesMap, TruncatedVector,
                     compose, compose_univariate, fit_log_linear, invert_univariate,
                     sphere_samples, univariate_coefficients)
from .utils import parallel_map

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-8
MIN_RADIUS = 1e-6
FACTOR_NODES = 512
MAX_FACTOR_ITERATIONS = 20
NEAR_IDENTITY = 0.5
SAFETY = 0.5


# --- local straightening -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LocalChart:
    """
    Local biholomorphism h with h(phi(z)) = (z, 0) near the base point.

    ``frame`` holds the tangent J = phi'(a) as its first column and an
    orthonormal normal frame after it; ``residual`` is the largest Taylor
    coefficient of h o phi - (z, 0) through the working order.
    """

    h: PowerSeriesMap
    base: complex
    frame: np.ndarray
    residual: float

    def apply(self, X) -> np.ndarray:
        return self.h.evaluate_batch(X)


def _fix_phases(columns: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest entry is real and positive"""
    out = columns.copy()
    for k in range(out.shape[1]):
        pivot = out[np.argmax(np.abs(out[:, k])), k]
        if pivot != 0:
            out[:, k] *= abs(pivot) / pivot
    return out


def straighten_chart(phi: PowerSeriesMap, tolerance: float = DEFAULT_TOLERANCE,
                     order: Optional[int] = None) -> LocalChart:
    """
    Local coordinates in which the disk phi becomes the zero section.

    ``phi`` is a one-variable series centered at a with values in C^M. The
    tangent direction is inverted by series reversion of its projection p,
    the normal part psi is written as a graph over the reversed parameter,
    and h(x) = (g(l x), Q^H x - psi(g(l x))) with l the left inverse of the
    tangent.

    Raises:
        NotImmersion: If phi'(a) is (numerically) zero
        RoydenError: If phi is not a disk in C^M with M >= 2
    """
    if phi.in_dim != 1:
        raise RoydenError("straighten_chart handles disks parametrized by one variable")
    M = phi.out_dim
    if M < 2:
        raise RoydenError("the ambient space needs dimension >= 2")
    N = order or phi.order
    raw = univariate_coefficients(phi)
    coeffs = np.zeros((N + 1, M), dtype=complex)
    coeffs[:min(N, phi.order) + 1] = raw[:N + 1]

    J = coeffs[1][:, None]
    sigma = float(np.linalg.svd(J, compute_uv=False).min())
    if sigma < tolerance:
        raise NotImmersion(f"phi'(a) has smallest singular value {sigma:.3e}")
    Q, _ = np.linalg.qr(J, mode='complete')
    complement = _fix_phases(Q[:, 1:])
    ell = np.linalg.pinv(J)[0]

    shifted = coeffs.copy()
    shifted[0] = 0.0
    p = shifted @ ell
    p[0] = 0.0
    normal = shifted @ complement.conj()
    normal[:2] = 0.0
    g = invert_univariate(p, N)
    psi = compose_univariate(normal, g, N)

    a = complex(phi.center.coords[0])
    terms = [HomogeneousMap.constant(np.concatenate([[a], np.zeros(M - 1)]))]
    linear = np.vstack([g[1] * ell[None, :], complement.conj().T])
    terms.append(HomogeneousMap.linear(linear))
    for n in range(2, N + 1):
        vector = np.concatenate([[g[n]], -psi[n]])
        terms.append(HomogeneousMap.ridge(vector, ell, n))

    polynomial = phi.is_polynomial and not np.any(p[2:])
    center = TruncatedVector(coeffs[0].copy())
    try:
        h = PowerSeriesMap.build(center, terms, math.inf if polynomial else None, polynomial)
    except InsufficientTerms:
        h = PowerSeriesMap.build(center, terms, phi.radius_estimate, polynomial)

    composed = compose(h, phi)
    residual = 0.0
    one = np.ones(1)
    for n, term in enumerate(composed.terms[:N + 1]):
        target = np.zeros(M, dtype=complex)
        if n == 0:
            target[0] = a
        elif n == 1:
            target[0] = 1.0
        residual = max(residual, float(np.linalg.norm(term.evaluate(one) - target)))
    logger.debug(f"straightened chart at {a}: residual {residual:.3e}, sigma {sigma:.3e}")
    return LocalChart(h, a, np.hstack([J, complement]), residual)


# --- linear part: matrix cocycle factorization ----------------------------------------

MatrixFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class JacobianBlock:
    """
    Derivative of a transition along the zero section, written in block form
    [[1, A(z)], [0, B(z)]] with A of shape (P, 1, M) and B of shape (P, M, M).
    """

    A: MatrixFunction
    B: MatrixFunction
    fibre_dim: int

    def is_identity(self, z, tolerance: float = DEFAULT_TOLERANCE) -> bool:
        z = np.asarray(z, dtype=complex).reshape(-1)
        eye = np.eye(self.fibre_dim)
        return (float(np.max(np.abs(self.A(z)))) <= tolerance
                and float(np.max(np.abs(self.B(z) - eye))) <= tolerance)


def jacobian_at_zero(T: JetMap) -> JacobianBlock:
    """
    The w-linear block of a transition that fixes the zero section pointwise.

    Raises:
        RoydenError: If T is not z + O(w) in its first component and O(w) in the rest
    """
    space = T.space
    M = space.fibre_dim
    lead = T.coeffs[0, 0].copy()
    lead[space.column(1)] -= 1.0
    if np.max(np.abs(lead)) > DEFAULT_TOLERANCE or np.max(np.abs(T.coeffs[1:, 0])) > DEFAULT_TOLERANCE:
        raise RoydenError("transition does not fix the zero section pointwise")
    rows = np.array([space.index[tuple(1 if j == i else 0 for j in range(M))] for i in range(M)])

    def values(z: np.ndarray) -> np.ndarray:
        return T.coefficients_at(z, rows)

    def A(z: np.ndarray) -> np.ndarray:
        return values(z)[:, :1, :]

    def B(z: np.ndarray) -> np.ndarray:
        return values(z)[:, 1:, :]

    return JacobianBlock(A, B, M)


@dataclass(frozen=True, eq=False)
class MultiplicativeFactorization:
    """
    B = B_0 B_1^{-1} on the overlap, B_0 holomorphic invertible on the inner
    disk and B_1 on the outer annulus including infinity.

    B_0 is the product of exp(L_j^+) and B_1 the product of exp(-L_j^-) over
    the refinement rounds j, with L^+ / L^- the nonnegative / negative Laurent
    parts of log of the remaining defect.
    """

    positive: Tuple[LaurentCoefficients, ...]
    negative: Tuple[LaurentCoefficients, ...]
    center: complex
    fibre_dim: int
    residual: float
    iterations: int

    def _product(self, parts: Sequence[LaurentCoefficients], sign: float, z) -> np.ndarray:
        zeta = np.asarray(z, dtype=complex).reshape(-1) - self.center
        M = self.fibre_dim
        out = np.broadcast_to(np.eye(M, dtype=complex), (zeta.shape[0], M, M)).copy()
        for part in parts:
            out = out @ expm(sign * part.evaluate(zeta).reshape(-1, M, M))
        return out

    def inner(self, z) -> np.ndarray:
        return self._product(self.positive, 1.0, z)

    def outer(self, z) -> np.ndarray:
        return self._product(self.negative, -1.0, z)

    def outer_inverse(self, z) -> np.ndarray:
        zeta = np.asarray(z, dtype=complex).reshape(-1) - self.center
        M = self.fibre_dim
        out = np.broadcast_to(np.eye(M, dtype=complex), (zeta.shape[0], M, M)).copy()
        for part in reversed(self.negative):
            out = out @ expm(part.evaluate(zeta).reshape(-1, M, M))
        return out


def _matrix_logs(values: np.ndarray) -> np.ndarray:
    logs = np.empty_like(values)
    for k, matrix in enumerate(values):
        logs[k], _ = logm(matrix, disp=False)
    return logs


def _overlap_circles(lo: float, hi: float) -> Tuple[float, float, float]:
    return lo + 0.25 * (hi - lo), 0.5 * (lo + hi), lo + 0.75 * (hi - lo)


def factor_multiplicative_cocycle(B: MatrixFunction, cover: Optional[Cover] = None,
                                  tolerance: float = 1e-10, nodes: int = FACTOR_NODES,
                                  max_iterations: int = MAX_FACTOR_ITERATIONS) -> MultiplicativeFactorization:
    """
    Factor an invertible matrix function on the annular overlap as B_0 B_1^{-1}.

    Each round takes a matrix logarithm of the remaining defect on the
    middle circle, splits it into Laurent parts and folds their exponentials
    into the factors; the defect then shrinks quadratically in log B.

    Raises:
        NotNearIdentity: If sup |B - I| reaches 0.5 on the overlap (operator norm,
            sampled on its two boundary circles) or exp(log B) misses B
    """
    cover = cover or Cover.standard()
    inner, _, lo, hi, mid = laurent_split_cover(cover)
    center = cover.sets[inner].center
    zeta = mid * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    target = np.asarray(B(center + zeta), dtype=complex)
    M = target.shape[1]

    edge = np.concatenate([center + radius * zeta / mid for radius in (lo, hi)])
    deviation = float(np.max(np.linalg.norm(np.asarray(B(edge), dtype=complex) - np.eye(M), 2, axis=(1, 2))))
    if not deviation < NEAR_IDENTITY:
        raise NotNearIdentity(f"sup |B - I| = {deviation:.3f} on the overlap (limit {NEAR_IDENTITY})")

    logs = _matrix_logs(target)
    mismatch = float(np.max(np.abs(expm(logs) - target)))
    if mismatch > 1e-8 * max(1.0, float(np.max(np.abs(target)))):
        raise NotNearIdentity(f"no principal logarithm of B on the overlap (mismatch {mismatch:.3e})")

    positive: List[LaurentCoefficients] = []
    negative: List[LaurentCoefficients] = []
    defect = logs
    factorization = MultiplicativeFactorization((), (), center, M, math.inf, 0)
    for iteration in range(1, max_iterations + 1):
        sampler = CircleSampler(mid, nodes, defect.reshape(nodes, -1))
        laurent = circle_coefficients(None, None, sampler).trimmed(mid)
        positive.append(laurent.positive_part())
        negative.append(laurent.negative_part())
        factorization = MultiplicativeFactorization(tuple(positive), tuple(negative), center, M,
                                                    math.inf, iteration)
        z = center + zeta
        remaining = np.linalg.solve(factorization.inner(z), target @ factorization.outer(z))
        gap = float(np.max(np.abs(remaining - np.eye(M))))
        logger.debug(f"factorization round {iteration}: defect {gap:.3e}")
        if gap <= tolerance:
            break
        defect = _matrix_logs(remaining)

    residual = 0.0
    theta = np.exp(2j * np.pi * np.arange(128) / 128)
    for radius in _overlap_circles(lo, hi):
        z = center + radius * theta
        rebuilt = factorization.inner(z) @ factorization.outer_inverse(z)
        residual = max(residual, float(np.max(np.abs(rebuilt - np.asarray(B(z), dtype=complex)))))
    return MultiplicativeFactorization(tuple(positive), tuple(negative), center, M,
                                       residual, factorization.iterations)


@dataclass(frozen=True, eq=False)
class LinearTrivialization:
    """
    Changes of the linear normal part making the transition's derivative the identity.

    In chart 0 the normal coordinates change by w -> B_0^{-1} w plus a shear
    of z by A_0 w; chart 1 likewise with B_1 and A_1.
    """

    factorization: MultiplicativeFactorization
    cousin: CousinSolution
    inner: int
    outer: int
    residual: float

    def shear(self, alpha: int, z) -> np.ndarray:
        M = self.factorization.fibre_dim
        values = self.cousin.evaluate(alpha, z)
        return values.reshape(-1, 1, M)

    def normalized_block(self, block: JacobianBlock) -> JacobianBlock:
        """The block after the change: B_0^{-1} B B_1 and A B_1 - A_0 + A_1"""
        fact = self.factorization

        def B(z: np.ndarray) -> np.ndarray:
            return np.linalg.solve(fact.inner(z), block.B(z) @ fact.outer(z))

        def A(z: np.ndarray) -> np.ndarray:
            return block.A(z) @ fact.outer(z) - self.shear(self.inner, z) + self.shear(self.outer, z)

        return JacobianBlock(A, B, block.fibre_dim)


def trivialize_linear_part(block: JacobianBlock, cover: Optional[Cover] = None,
                           tolerance: float = 1e-10) -> LinearTrivialization:
    """
    Make the linear block [[1, A], [0, B]] of a transition the identity.

    B is factored multiplicatively; the remaining A B_1 is a vector-valued
    additive cocycle split by ``solve_cousin``.

    Raises:
        NotNearIdentity: If B is too far from the identity on the overlap
    """
    cover = cover or Cover.standard()
    inner, outer, lo, hi, _ = laurent_split_cover(cover)
    fact = factor_multiplicative_cocycle(block.B, cover, tolerance)
    M = block.fibre_dim

    def a_tilde(z: np.ndarray) -> np.ndarray:
        return (block.A(z) @ fact.outer(z)).reshape(-1, M)

    cousin = solve_cousin(cover, AdditiveCocycle.from_pairs({(inner, outer): a_tilde}),
                          method='laurent', tolerance=max(tolerance, 1e-12))
    result = LinearTrivialization(fact, cousin, inner, outer, 0.0)
    normalized = result.normalized_block(block)
    theta = np.exp(2j * np.pi * np.arange(64) / 64)
    residual = 0.0
    for radius in _overlap_circles(lo, hi):
        z = cover.sets[inner].center + radius * theta
        residual = max(residual,
                       float(np.max(np.abs(normalized.B(z) - np.eye(M)))),
                       float(np.max(np.abs(normalized.A(z)))))
    logger.info(f"linear part trivialized in {fact.iterations} round(s), residual {residual:.3e}")
    return LinearTrivialization(fact, cousin, inner, outer, residual)


# --- atlases of jets over the annulus cover ---------------------------------------------

@dataclass(frozen=True, eq=False)
class ChartAtlas:
    """
    Two charts over the standard cover of the closed disk.

    Chart coordinates are (z, w) with z in the base set and w in C^M.
    ``transition`` maps coordinates of the outer chart to those of the inner
    chart over the overlap; ``ambient[alpha]`` maps chart alpha into the
    ambient space.
    """

    transition: JetMap
    ambient: Tuple[JetMap, JetMap]
    cover: Cover = field(default_factory=Cover.standard)

    def __post_init__(self):
        laurent_split_cover(self.cover)
        if any(a.space != self.transition.space for a in self.ambient):
            raise RoydenError("ambient jets and transition live on different jet spaces")

    @property
    def space(self) -> JetSpace:
        return self.transition.space

    @property
    def charts(self) -> Tuple[int, int]:
        inner, outer, *_ = laurent_split_cover(self.cover)
        return inner, outer

    def transition_between(self, a: int, b: int) -> JetMap:
        """T_ab, taking chart-b coordinates to chart-a coordinates"""
        inner, outer = self.charts
        if a == b:
            return JetMap.identity(self.space)
        if (a, b) == (inner, outer):
            return self.transition
        if (a, b) == (outer, inner):
            return self.transition.inverse()
        raise RoydenError(f"no charts ({a}, {b}) in a two-chart atlas")

    def consistency(self) -> float:
        """Largest coefficient of T_01 o T_10 - id"""
        inner, outer = self.charts
        loop = self.transition.compose(self.transition_between(outer, inner))
        return (loop - JetMap.identity(self.space)).max_abs()

    @classmethod
    def identity(cls, fibre_dim: int, degree: int = DEFAULT_DEGREE, band: int = DEFAULT_BAND,
                 cover: Optional[Cover] = None) -> "ChartAtlas":
        space = jet_space(fibre_dim, degree, band)
        ident = JetMap.identity(space)
        return cls(ident, (ident, ident), cover or Cover.standard())

    @classmethod
    def from_graph(cls, graph: np.ndarray, degree: int = DEFAULT_DEGREE, band: int = DEFAULT_BAND,
                   frame: Optional[np.ndarray] = None, cover: Optional[Cover] = None) -> "ChartAtlas":
        """
        Atlas of the graph disk z -> (z, sum_k graph[k] z^k) in C x C^M.

        Both charts are (z, w) -> (z, graph(z) + frame w); the transition is
        the identity.

        Raises:
            RoydenError: If the graph has more Taylor coefficients than the band holds
        """
        graph = np.atleast_2d(np.asarray(graph, dtype=complex))
        if graph.shape[0] > band + 1:
            raise RoydenError(f"{graph.shape[0]} Taylor coefficients exceed the Laurent band {band}")
        M = graph.shape[1]
        frame = np.eye(M, dtype=complex) if frame is None else np.asarray(frame, dtype=complex)
        space = jet_space(M, degree, band)
        terms: Dict[Tuple[int, Tuple[int, ...], int], complex] = {(0, (0,) * M, 1): 1.0}
        for k, row in enumerate(graph):
            for j, value in enumerate(row):
                if value != 0:
                    terms[(1 + j, (0,) * M, k)] = value
        for j in range(M):
            for i in range(M):
                if frame[j, i] != 0:
                    terms[(1 + j, tuple(1 if m == i else 0 for m in range(M)), 0)] = frame[j, i]
        ambient = JetMap.from_terms(space, terms, base='zero')
        return cls(JetMap.identity(space), (ambient, ambient), cover or Cover.standard())

    @classmethod
    def conjugated(cls, changes: Tuple[JetMap, JetMap], cover: Optional[Cover] = None) -> "ChartAtlas":
        """
        Atlas whose chart alpha is g_alpha of a trivial product.

        The transition is g_inner o g_outer^{-1} and chart alpha maps back by
        g_alpha^{-1}, so normalization should recover H_alpha = g_alpha^{-1}.
        """
        cover = cover or Cover.standard()
        inner, outer, *_ = laurent_split_cover(cover)
        g = {inner: changes[0], outer: changes[1]}
        transition = g[inner].compose(g[outer].inverse())
        ambient = (g[0].inverse(), g[1].inverse())
        return cls(transition, ambient, cover)

    def save(self, directory: Union[str, Path]) -> List[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = [directory / 'transition.csv', directory / 'ambient_0.csv', directory / 'ambient_1.csv']
        for path, jet in zip(paths, (self.transition,) + tuple(self.ambient)):
            write_jet_csv(jet, path)
        return paths

    @classmethod
    def load(cls, directory: Union[str, Path], fibre_dim: int, degree: int = DEFAULT_DEGREE,
             band: int = DEFAULT_BAND, cover: Optional[Cover] = None) -> "ChartAtlas":
        """
        Read ``transition.csv`` and optional ``ambient_<alpha>.csv`` jets.

        Missing ambient files default to the identity chart map.
        """
        directory = Path(directory)
        space = jet_space(fibre_dim, degree, band)
        transition = read_jet_csv(directory / 'transition.csv', space)
        ambient = []
        for alpha in (0, 1):
            path = directory / f'ambient_{alpha}.csv'
            ambient.append(read_jet_csv(path, space) if path.exists() else JetMap.identity(space))
        return cls(transition, (ambient[0], ambient[1]), cover or Cover.standard())


# --- degree-by-degree normalization -----------------------------------------------------

@dataclass(frozen=True)
class DegreeStep:
    """Bookkeeping for one degree of the normalization"""

    degree: int
    transition_norm: float
    change_norms: Tuple[float, float]
    cousin_constant: float
    delta_residual: float
    locality_defect: float
    residual: float


@dataclass(frozen=True, eq=False)
class RoydenResult:
    """
    Normalized atlas: changes H_alpha with H_inner o T o H_outer^{-1} = id
    through the jet degree, plus the certified polyradius of the product
    neighborhood in the normal direction.
    """

    atlas: ChartAtlas
    transition: JetMap
    changes: Tuple[JetMap, JetMap]
    epsilon: float
    epsilon_interval: Tuple[float, float]
    norm_table: np.ndarray
    steps: Tuple[DegreeStep, ...]
    residual: float

    @property
    def degree(self) -> int:
        return self.atlas.space.degree

    def trace_rows(self) -> List[List[float]]:
        """Rows of degree, per-chart norms, their max and the Cousin constant"""
        constants = {step.degree: step.cousin_constant for step in self.steps}
        transition = {step.degree: step.transition_norm for step in self.steps}
        rows = []
        for n in range(2, self.degree + 1):
            chart0, chart1 = self.norm_table[n]
            rows.append([n, chart0, chart1, max(chart0, chart1),
                         constants.get(n, 0.0), transition.get(n, 0.0)])
        return rows


NORM_TRACE_HEADER = ['degree', 'chart_0', 'chart_1', 'max', 'cousin_constant', 'transition_norm']


def _certify_radius(norms: np.ndarray, floor: float) -> Tuple[float, float, float]:
    degrees = [n for n in range(2, norms.shape[0]) if norms[n] > floor]
    if not degrees:
        return math.inf, math.inf, math.inf
    values = [float(norms[n]) for n in degrees]
    if len(degrees) == 1:
        eps = values[0] ** (-1.0 / degrees[0])
        return eps, eps, eps
    fit = fit_log_linear(degrees, values)
    eps = math.exp(-fit.slope)
    return eps, math.exp(-(fit.slope + 2.0 * fit.stderr)), math.exp(-(fit.slope - 2.0 * fit.stderr))


def normalize_transitions(atlas: ChartAtlas, degree: Optional[int] = None,
                          tolerance: float = DEFAULT_TOLERANCE, threads: int = 1,
                          min_radius: float = MIN_RADIUS) -> RoydenResult:
    """
    Bring the transition to the identity through ``degree`` in w.

    At each degree n the degree-n part of T - id is an additive cocycle
    f = c_inner - c_outer over the two-chart cover. The changes
    Phi_alpha = id - c_alpha remove it without touching lower degrees, and
    they accumulate into H_alpha.

    Raises:
        RoydenError: If T - id has terms of degree <= 1 (trivialize the linear part first)
        RadiusCollapse: If the fitted polyradius is below ``min_radius``
    """
    space = atlas.space
    N = space.degree if degree is None else min(degree, space.degree)
    inner, outer = atlas.charts
    _, _, lo, hi, mid = laurent_split_cover(atlas.cover)
    identity = JetMap.identity(space)

    T = atlas.transition
    low = (T - identity).max_abs(0, 1)
    if low > tolerance:
        raise RoydenError(f"transition differs from the identity in degrees 0-1 by {low:.3e}")

    changes = {inner: identity, outer: identity}
    steps: List[DegreeStep] = []
    for n in range(2, N + 1):
        part = (T - identity).degree_part(n)
        size = part.max_abs()
        if size == 0.0:
            steps.append(DegreeStep(n, 0.0, (0.0, 0.0), 0.0, 0.0, 0.0, 0.0))
            continue
        cocycle = AdditiveCocycle.from_pairs({(inner, outer): part.coefficient_function(n)})
        solution = solve_cousin(atlas.cover, cocycle, method='laurent', tolerance=tolerance)
        zero = JetMap.zeros(space)
        fix = {}
        for alpha in (inner, outer):
            band = laurent_band(solution.cochain[alpha], space, mid)
            # c_inner is holomorphic on the disk, c_outer vanishes at infinity
            band[:, space.powers < 0 if alpha == inner else space.powers >= 0] = 0.0
            fix[alpha] = identity - zero.with_degree_coefficients(n, band)

        before = T
        T = fix[inner].compose(T.compose(fix[outer].inverse()))

        def advance(alpha: int) -> JetMap:
            return fix[alpha].compose(changes[alpha])

        updated = parallel_map(advance, [inner, outer], threads)
        changes = {inner: updated[0], outer: updated[1]}

        locality = (T - before).max_abs(0, n - 1)
        residual = (T - identity).max_abs(n, n)
        norms = ((fix[inner] - identity).max_abs(), (fix[outer] - identity).max_abs())
        steps.append(DegreeStep(n, size, norms, solution.constant, solution.delta_residual,
                                locality, residual))
        logger.info(f"degree {n}: |T_n| = {size:.3e}, C_n = {solution.constant:.3g}, "
                    f"residual {residual:.3e}")

    radii = {inner: (mid,), outer: (mid, 1.0 + 0.5 * atlas.cover.margin)}
    per_chart = [(changes[alpha] - identity).degree_norms(radii[alpha]) for alpha in (inner, outer)]
    table = np.stack(per_chart, axis=1)
    worst = np.max(table, axis=1)
    floor = 1e-12 * max(1.0, float(np.max(worst)))
    eps, eps_lo, eps_hi = _certify_radius(worst, floor)
    if eps <= min_radius:
        raise RadiusCollapse(f"fitted polyradius {eps:.3e} is below {min_radius:.1e}")

    residual = (T - identity).max_abs(0, N)
    logger.info(f"normalized through degree {N}: epsilon = {eps:.4g} "
                f"[{eps_lo:.4g}, {eps_hi:.4g}], residual {residual:.3e}")
    return RoydenResult(atlas, T, (changes[0], changes[1]), eps, (eps_lo, eps_hi),
                        table, tuple(steps), residual)


# --- gluing ------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class TubularMap:
    """
    Biholomorphism from {|z| < 1 + margin} x {|w| < radius} onto a
    neighborhood of the disk, taking the zero section to the disk.

    Points with |z| below ``split_radius`` use the inner chart's piece, all
    others the outer one; the two agree on the overlap within ``agreement``.
    """

    pieces: Tuple[JetMap, JetMap]
    inner: int
    split_radius: float
    radius: float
    epsilon: float
    agreement: float
    restriction_defect: float

    @property
    def fibre_dim(self) -> int:
        return self.pieces[0].space.fibre_dim

    def _route(self, Z: np.ndarray, method: str) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        use_inner = np.abs(Z[:, 0]) < self.split_radius
        parts = []
        for alpha, mask in ((self.inner, use_inner), (1 - self.inner, ~use_inner)):
            if np.any(mask):
                parts.append((mask, getattr(self.pieces[alpha], method)(Z[mask])))
        shape = parts[0][1].shape[1:]
        out = np.zeros((Z.shape[0],) + shape, dtype=complex)
        for mask, values in parts:
            out[mask] = values
        return out

    def evaluate(self, Z) -> np.ndarray:
        return self._route(Z, 'evaluate')

    def jacobian(self, Z) -> np.ndarray:
        return self._route(Z, 'jacobian')

    def invert(self, X, start=None, tolerance: float = 1e-13, max_iterations: int = 50) -> np.ndarray:
        """
        Newton's method for Z with evaluate(Z) = X, started from ``start``.

        The default start is X itself, which suits maps close to the identity.
        """
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        Z = X.copy() if start is None else np.atleast_2d(np.asarray(start, dtype=complex)).copy()
        for _ in range(max_iterations):
            step = np.linalg.solve(self.jacobian(Z), (self.evaluate(Z) - X)[:, :, None])[:, :, 0]
            Z = Z - step
            if float(np.max(np.abs(step))) < tolerance:
                break
        return Z

    def biholomorphy_defect(self, Z) -> float:
        """max |invert(evaluate(Z)) - Z| over the given points"""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        return float(np.max(np.abs(self.invert(self.evaluate(Z), start=Z) - Z)))

    def fibre_series(self, z0: complex) -> PowerSeriesMap:
        """The fibre w -> F(z0, w) as a polynomial series centered at w = 0"""
        alpha = self.inner if abs(z0) < self.split_radius else 1 - self.inner
        piece = self.pieces[alpha]
        space = piece.space
        at_z = piece.coefficients_at(np.array([z0]))[0]
        terms = []
        for n in range(space.degree + 1):
            rows = np.flatnonzero(space.degree_rows(n))
            monomials = {space.monomials[r]: at_z[:, r] for r in rows if np.any(at_z[:, r])}
            if n == 0:
                terms.append(HomogeneousMap.constant(at_z[:, rows[0]]))
            elif monomials:
                terms.append(HomogeneousMap.from_monomials(monomials, space.fibre_dim, piece.components))
            else:
                terms.append(HomogeneousMap.zero(n, space.fibre_dim, piece.components))
        return PowerSeriesMap.build(np.zeros(space.fibre_dim), terms, math.inf, polynomial=True)


def assemble_tubular_map(result: RoydenResult, ambient: Optional[Tuple[JetMap, JetMap]] = None,
                         safety: float = SAFETY, tolerance: float = DEFAULT_TOLERANCE,
                         samples: int = 64, seed: int = 20240917) -> TubularMap:
    """
    Glue F_alpha = ambient_alpha o H_alpha^{-1} into one tubular map.

    Raises:
        ChartDisagreement: If the two pieces differ on the overlap beyond tolerance
    """
    atlas = result.atlas
    ambient = ambient or atlas.ambient
    inner, outer = atlas.charts
    _, _, lo, hi, mid = laurent_split_cover(atlas.cover)
    pieces = tuple(ambient[alpha].compose(result.changes[alpha].inverse()) for alpha in (0, 1))

    radius = safety * result.epsilon
    M = atlas.space.fibre_dim
    reach = min(radius, 0.1)
    rng = np.random.default_rng(seed)
    theta = np.exp(2j * np.pi * np.arange(32) / 32)
    agreement = 0.0
    for r in _overlap_circles(lo, hi):
        z = r * theta
        directions = sphere_samples(z.shape[0], M, seed=int(rng.integers(1 << 30)))
        w = directions * (reach * rng.uniform(0.0, 1.0, size=(z.shape[0], 1)))
        Z = np.hstack([z[:, None], w])
        a, b = pieces[inner].evaluate(Z), pieces[outer].evaluate(Z)
        scale = max(1.0, float(np.max(np.abs(a))))
        agreement = max(agreement, float(np.max(np.abs(a - b))) / scale)
    if agreement > tolerance:
        raise ChartDisagreement(f"pieces differ by {agreement:.3e} on the overlap (tolerance {tolerance:.1e})")

    zero_w = np.zeros((theta.shape[0], M))
    defect = 0.0
    for alpha, r in ((inner, 0.5 * lo), (inner, mid), (outer, mid), (outer, 1.0)):
        Z = np.hstack([(r * theta)[:, None], zero_w])
        defect = max(defect, float(np.max(np.abs(pieces[alpha].evaluate(Z) - ambient[alpha].evaluate(Z)))))
    logger.info(f"tubular map: radius {radius:.4g}, overlap agreement {agreement:.3e}, "
                f"zero-section defect {defect:.3e}")
    return TubularMap((pieces[0], pieces[1]), inner, mid, radius, result.epsilon, agreement, defect)
