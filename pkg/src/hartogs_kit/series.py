"""
Complex-vector power series calculus.

Provides the computational model of a holomorphic map near a point:
a center, finitely many homogeneous terms and a radius estimate, plus
evaluation with certified tail bounds, Cauchy-Hadamard radius fitting and
sampled lower bounds for homogeneous-term norms.

Also hosts the univariate series helpers (truncated products, Horner
composition, Newton reversion) that the chart-straightening code needs.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Callable, Dict, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, stats
from scipy.special import ndtri
from scipy.stats import qmc

from .errors import InsufficientTerms, NonFinite, OutOfRadius, SeriesError
from .quadrature import next_power_of_two

logger = logging.getLogger(__name__)

DEFAULT_TRUNCATION = 16
DEFAULT_NORM_SAMPLES = 256
DEFAULT_SEED = 20240917

# Dense symmetric tensors are only kept while they stay small.
MAX_DENSE_DEGREE = 12
MAX_DENSE_DIM = 8
MAX_DENSE_ENTRIES = 1 << 16

_BATCH = 512
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class TruncatedVector:
    """A point of C^M standing for an l2 point, with a certified tail bound"""

    coords: np.ndarray
    tail_bound: float = 0.0

    def __post_init__(self):
        coords = np.array(self.coords, dtype=complex).reshape(-1)
        coords.setflags(write=False)
        object.__setattr__(self, 'coords', coords)
        if not (self.tail_bound >= 0.0):
            raise ValueError(f"tail_bound must be nonnegative, got {self.tail_bound}")

    @classmethod
    def of(cls, *values: complex, tail_bound: float = 0.0) -> "TruncatedVector":
        return cls(np.array(values, dtype=complex), tail_bound)

    @classmethod
    def zeros(cls, length: int) -> "TruncatedVector":
        return cls(np.zeros(length, dtype=complex))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))

    def padded(self, length: int) -> "TruncatedVector":
        """Zero-pad to ``length``; shrinking is only allowed over zero coordinates"""
        if length == self.dim:
            return self
        if length < self.dim:
            if np.any(self.coords[length:] != 0):
                raise ValueError(f"cannot truncate nonzero coordinates beyond {length}")
            return TruncatedVector(self.coords[:length], self.tail_bound)
        coords = np.zeros(length, dtype=complex)
        coords[:self.dim] = self.coords
        return TruncatedVector(coords, self.tail_bound)

    def __add__(self, other: "TruncatedVector") -> "TruncatedVector":
        length = max(self.dim, other.dim)
        a, b = self.padded(length), other.padded(length)
        return TruncatedVector(a.coords + b.coords, self.tail_bound + other.tail_bound)

    def __sub__(self, other: "TruncatedVector") -> "TruncatedVector":
        length = max(self.dim, other.dim)
        a, b = self.padded(length), other.padded(length)
        return TruncatedVector(a.coords - b.coords, self.tail_bound + other.tail_bound)

    def scaled(self, factor: complex) -> "TruncatedVector":
        return TruncatedVector(self.coords * factor, abs(factor) * self.tail_bound)


def _as_vector(x) -> TruncatedVector:
    if isinstance(x, TruncatedVector):
        return x
    return TruncatedVector(np.atleast_1d(np.asarray(x, dtype=complex)))


def _multinomial(exponents: Sequence[int]) -> int:
    total = math.factorial(sum(exponents))
    for e in exponents:
        total //= math.factorial(e)
    return total


def _dense_allowed(degree: int, in_dim: int) -> bool:
    return (degree <= MAX_DENSE_DEGREE and in_dim <= MAX_DENSE_DIM
            and in_dim ** degree <= MAX_DENSE_ENTRIES)


def _slot_counts(degree: int, in_dim: int) -> np.ndarray:
    """Row j holds how often each input index occurs in the j-th flat tensor slot tuple"""
    index = np.indices((in_dim,) * degree).reshape(degree, -1).T
    counts = np.zeros((index.shape[0], in_dim), dtype=int)
    for slot in range(degree):
        counts[np.arange(index.shape[0]), index[:, slot]] += 1
    return counts


def _symmetrized(tensor: np.ndarray) -> np.ndarray:
    """Average over slot permutations: entries sharing a count vector are replaced by their mean"""
    degree, in_dim = tensor.ndim - 1, tensor.shape[1]
    _, label = np.unique(_slot_counts(degree, in_dim), axis=0, return_inverse=True)
    label = label.reshape(-1)
    sizes = np.bincount(label)
    flat = tensor.reshape(tensor.shape[0], -1)
    means = np.stack([(np.bincount(label, weights=row.real) + 1j * np.bincount(label, weights=row.imag)) / sizes
                      for row in flat])
    return means[:, label].reshape(tensor.shape)


@dataclass(frozen=True, eq=False)
class HomogeneousMap:
    """
    An n-homogeneous polynomial map from C^in_dim to C^out_dim.

    Stored either as a dense tensor of shape ``(out_dim,) + (in_dim,) * degree``
    that is symmetric in its last ``degree`` slots, or as a batch callable
    ``func(X) -> Y`` with ``X`` of shape (S, in_dim) and ``Y`` of shape
    (S, out_dim) when the dense form would be too large.
    """

    degree: int
    in_dim: int
    out_dim: int
    tensor: Optional[np.ndarray] = None
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    known_norm: Optional[float] = None
    source_monomials: Optional[Dict[Tuple[int, ...], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.degree < 0:
            raise SeriesError(f"degree must be nonnegative, got {self.degree}")
        if (self.tensor is None) == (self.func is None):
            raise SeriesError("exactly one of tensor or func must be given")
        if self.tensor is not None:
            expected = (self.out_dim,) + (self.in_dim,) * self.degree
            if self.tensor.shape != expected:
                raise SeriesError(f"tensor shape {self.tensor.shape} != {expected}")

    # --- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value) -> "HomogeneousMap":
        value = np.atleast_1d(np.asarray(value, dtype=complex))
        return cls(0, 1, value.shape[0], tensor=value.copy(),
                   known_norm=float(np.linalg.norm(value)))

    @classmethod
    def linear(cls, matrix) -> "HomogeneousMap":
        matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(1, matrix.shape[1], matrix.shape[0], tensor=matrix.copy())

    @classmethod
    def from_tensor(cls, tensor, symmetrize: bool = True) -> "HomogeneousMap":
        """Build from a dense tensor; slots are averaged over all permutations"""
        tensor = np.asarray(tensor, dtype=complex)
        degree = tensor.ndim - 1
        in_dim = tensor.shape[1] if degree else 1
        if symmetrize and degree > 1:
            tensor = _symmetrized(tensor)
        return cls(degree, in_dim, tensor.shape[0], tensor=tensor)

    @classmethod
    def from_monomials(cls, monomials: Dict[Tuple[int, ...], object],
                       in_dim: int, out_dim: int) -> "HomogeneousMap":
        """
        Build from monomial coefficients ``{exponent tuple: output vector}``.

        All exponent tuples must share the same total degree. Dense storage is
        used when it fits, otherwise an evaluation-only callable.
        """
        cleaned: Dict[Tuple[int, ...], np.ndarray] = {}
        degree = None
        for alpha, coef in monomials.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != in_dim:
                raise SeriesError(f"exponent {alpha} does not match input dimension {in_dim}")
            d = sum(alpha)
            if degree is None:
                degree = d
            elif d != degree:
                raise SeriesError("monomials of mixed degree in one homogeneous map")
            cleaned[alpha] = np.broadcast_to(np.asarray(coef, dtype=complex), (out_dim,)).copy()
        if degree is None:
            raise SeriesError("no monomials given; use HomogeneousMap.zero")

        if _dense_allowed(degree, in_dim):
            tensor = np.zeros((out_dim,) + (in_dim,) * degree, dtype=complex)
            if degree == 0:
                tensor[:] = cleaned.get((0,) * in_dim, 0)
            else:
                counts = _slot_counts(degree, in_dim)
                flat = tensor.reshape(out_dim, -1)
                for row, count in enumerate(map(tuple, counts)):
                    coef = cleaned.get(count)
                    if coef is not None:
                        flat[:, row] = coef / _multinomial(count)
            return cls(degree, in_dim, out_dim, tensor=tensor, source_monomials=cleaned)

        exps = np.array(list(cleaned.keys()), dtype=int)
        coefs = np.array(list(cleaned.values()), dtype=complex)

        def evaluate(X: np.ndarray) -> np.ndarray:
            powers = np.prod(X[:, None, :] ** exps[None, :, :], axis=2)
            return powers @ coefs

        return cls(degree, in_dim, out_dim, func=evaluate, source_monomials=cleaned)

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], degree: int,
                      in_dim: int, out_dim: int,
                      known_norm: Optional[float] = None) -> "HomogeneousMap":
        return cls(degree, in_dim, out_dim, func=func, known_norm=known_norm)

    @classmethod
    def ridge(cls, vector, functional, degree: int) -> "HomogeneousMap":
        """The map x -> vector * (functional . x)^degree, whose norm is known exactly"""
        vector = np.atleast_1d(np.asarray(vector, dtype=complex))
        functional = np.atleast_1d(np.asarray(functional, dtype=complex))
        norm = float(np.linalg.norm(vector) * np.linalg.norm(functional) ** degree)

        def evaluate(X: np.ndarray) -> np.ndarray:
            return np.outer((X @ functional) ** degree, vector)

        return cls(degree, functional.shape[0], vector.shape[0], func=evaluate, known_norm=norm)

    @classmethod
    def zero(cls, degree: int, in_dim: int, out_dim: int) -> "HomogeneousMap":
        if _dense_allowed(degree, in_dim):
            return cls(degree, in_dim, out_dim,
                       tensor=np.zeros((out_dim,) + (in_dim,) * degree, dtype=complex),
                       known_norm=0.0)
        return cls(degree, in_dim, out_dim,
                   func=lambda X: np.zeros((X.shape[0], out_dim), dtype=complex),
                   known_norm=0.0)

    # --- evaluation -------------------------------------------------------

    def evaluate_batch(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        if self.degree and X.shape[1] != self.in_dim:
            raise SeriesError(f"input dimension {X.shape[1]} != {self.in_dim}")
        if self.func is not None:
            return np.asarray(self.func(X), dtype=complex).reshape(X.shape[0], self.out_dim)
        if self.degree == 0:
            return np.broadcast_to(self.tensor, (X.shape[0], self.out_dim)).copy()
        blocks = []
        for start in range(0, X.shape[0], _BATCH):
            chunk = X[start:start + _BATCH]
            acc = np.tensordot(chunk, self.tensor, axes=([1], [self.tensor.ndim - 1]))
            for _ in range(self.degree - 1):
                acc = np.einsum('s...i,si->s...', acc, chunk)
            blocks.append(acc)
        return np.concatenate(blocks, axis=0)

    def evaluate(self, x) -> np.ndarray:
        return self.evaluate_batch(np.asarray(x, dtype=complex).reshape(1, -1))[0]

    @cached_property
    def norm_estimate(self) -> float:
        """Certified lower bound of sup{|P(x)| : |x| <= 1} (exact when known)"""
        if self.known_norm is not None:
            return float(self.known_norm)
        return homogeneous_norm(self, DEFAULT_NORM_SAMPLES)

    def is_zero(self) -> bool:
        if self.tensor is not None:
            return not np.any(self.tensor)
        return self.norm_estimate == 0.0

    def monomials(self) -> Dict[Tuple[int, ...], np.ndarray]:
        """Monomial coefficients {exponent tuple: output vector}, zero entries dropped"""
        if self.source_monomials is not None:
            return {a: c for a, c in self.source_monomials.items() if np.any(c)}
        if self.tensor is None:
            raise SeriesError("evaluation-only homogeneous map has no monomial form")
        result = {}
        for idx in combinations_with_replacement(range(self.in_dim), self.degree):
            alpha = tuple(idx.count(i) for i in range(self.in_dim))
            coef = self.tensor[(slice(None),) + idx] * _multinomial(alpha)
            if np.any(coef):
                result[alpha] = coef
        return result

    def __add__(self, other: "HomogeneousMap") -> "HomogeneousMap":
        if (self.degree, self.in_dim, self.out_dim) != (other.degree, other.in_dim, other.out_dim):
            raise SeriesError("cannot add homogeneous maps of different shape")
        if self.tensor is not None and other.tensor is not None:
            return HomogeneousMap(self.degree, self.in_dim, self.out_dim,
                                  tensor=self.tensor + other.tensor)
        a, b = self, other
        return HomogeneousMap.from_callable(lambda X: a.evaluate_batch(X) + b.evaluate_batch(X),
                                            self.degree, self.in_dim, self.out_dim)

    def scaled(self, factor: complex) -> "HomogeneousMap":
        norm = None if self.known_norm is None else abs(factor) * self.known_norm
        if self.tensor is not None:
            return HomogeneousMap(self.degree, self.in_dim, self.out_dim,
                                  tensor=self.tensor * factor, known_norm=norm)
        base = self
        return HomogeneousMap.from_callable(lambda X: factor * base.evaluate_batch(X),
                                            self.degree, self.in_dim, self.out_dim, norm)


def sphere_samples(count: int, dim: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere of C^dim, shape (count, dim)"""
    sampler = qmc.Sobol(d=2 * dim, scramble=True, seed=seed)
    m = max(1, math.ceil(math.log2(count)))
    U = np.clip(sampler.random_base2(m)[:count], 1e-12, 1 - 1e-12)
    G = ndtri(U)
    Z = G[:, :dim] + 1j * G[:, dim:]
    return Z / np.linalg.norm(Z, axis=1, keepdims=True)


def homogeneous_norm(P: HomogeneousMap, sample_count: int, seed: int = DEFAULT_SEED) -> float:
    """
    Lower bound of sup{|P(x)| : |x| <= 1}.

    Scrambled Sobol points are pushed onto the complex unit sphere through
    the inverse normal CDF, then BFGS ascends from the best sample. The
    returned value is attained at an actual unit vector, so it never exceeds
    the true norm.

    Args:
        P: Homogeneous map to measure
        sample_count: Number of quasi-random sphere samples (>= 1)
        seed: Scrambling seed; fixed seed gives a fixed answer

    Returns:
        Nonnegative lower bound of the operator-style norm
    """
    if sample_count < 1:
        raise ValueError(f"sample_count must be >= 1, got {sample_count}")
    if P.degree == 0:
        return float(np.linalg.norm(P.evaluate(np.zeros(P.in_dim))))

    d = P.in_dim
    Z = np.vstack([np.eye(d, dtype=complex), sphere_samples(sample_count, d, seed)])

    values = np.linalg.norm(P.evaluate_batch(Z), axis=1)
    best = int(np.argmax(values))
    best_value = float(values[best])
    if best_value == 0.0:
        return 0.0

    def objective(y: np.ndarray) -> float:
        z = y[:d] + 1j * y[d:]
        nz = np.linalg.norm(z)
        if nz == 0.0:
            return 0.0
        return -float(np.linalg.norm(P.evaluate(z / nz)))

    y0 = np.concatenate([Z[best].real, Z[best].imag])
    result = optimize.minimize(objective, y0, method='BFGS',
                               options={'gtol': 1e-12, 'maxiter': 400})
    ascended = -float(result.fun) if np.isfinite(result.fun) else 0.0
    return max(best_value, ascended)


class LinearFit(NamedTuple):
    slope: float
    intercept: float
    stderr: float


def fit_log_linear(degrees: Sequence[int], norms: Sequence[float]) -> LinearFit:
    """
    Regress log(norm) on degree over the top half of the available degrees.

    Zero norms must be filtered out by the caller.
    """
    order = np.argsort(degrees)
    x = np.asarray(degrees, dtype=float)[order]
    y = np.log(np.asarray(norms, dtype=float)[order])
    keep = max(2, math.ceil(len(x) / 2))
    x, y = x[-keep:], y[-keep:]
    if len(x) == 2:
        slope = (y[1] - y[0]) / (x[1] - x[0])
        return LinearFit(float(slope), float(y[0] - slope * x[0]), 0.0)
    fit = stats.linregress(x, y)
    return LinearFit(float(fit.slope), float(fit.intercept), float(fit.stderr))


@dataclass(frozen=True, eq=False)
class PowerSeriesMap:
    """Center, homogeneous terms of degree 0..N and a radius estimate"""

    center: TruncatedVector
    terms: Tuple[HomogeneousMap, ...]
    radius_estimate: float = math.inf
    is_polynomial: bool = False

    @classmethod
    def build(cls, center, terms: Sequence[HomogeneousMap],
              radius: Optional[float] = None, polynomial: bool = False) -> "PowerSeriesMap":
        """
        Validate terms and attach a radius.

        Raises:
            SeriesError: If degrees are out of order or dimensions disagree
            InsufficientTerms: If no radius is given and none can be fitted
        """
        center = _as_vector(center)
        terms = tuple(terms)
        if not terms:
            raise SeriesError("a power series needs at least the degree-0 term")
        for n, term in enumerate(terms):
            if term.degree != n:
                raise SeriesError(f"term {n} has degree {term.degree}")
            if n and term.in_dim != center.dim:
                raise SeriesError(f"term {n} input dimension {term.in_dim} != center {center.dim}")
            if term.out_dim != terms[0].out_dim:
                raise SeriesError("terms disagree on output dimension")
        series = cls(center, terms, math.inf, polynomial)
        if radius is None:
            radius = estimate_radius(series)
        if not radius > 0:
            raise SeriesError(f"radius must be positive, got {radius}")
        return cls(center, terms, float(radius), polynomial)

    @classmethod
    def from_univariate(cls, coeffs, center: complex = 0.0, radius: Optional[float] = None,
                        polynomial: bool = False) -> "PowerSeriesMap":
        """Series in one variable with vector coefficients ``coeffs[n]`` (shape (N+1,) or (N+1, m))"""
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim == 1:
            coeffs = coeffs[:, None]
        terms = []
        for n, c in enumerate(coeffs):
            tensor = c.reshape((c.shape[0],) + (1,) * n)
            terms.append(HomogeneousMap(n, 1, c.shape[0], tensor=tensor.copy(),
                                        known_norm=float(np.linalg.norm(c))))
        return cls.build(TruncatedVector.of(center), terms, radius, polynomial)

    @property
    def in_dim(self) -> int:
        return self.center.dim

    @property
    def out_dim(self) -> int:
        return self.terms[0].out_dim

    @property
    def order(self) -> int:
        return len(self.terms) - 1

    def evaluate(self, x) -> TruncatedVector:
        return eval_series(self, x)

    def evaluate_batch(self, X) -> np.ndarray:
        """Evaluate at many points (S, in_dim); no radius or tail bookkeeping"""
        X = np.atleast_2d(np.asarray(X, dtype=complex)) - self.center.coords
        total = np.zeros((X.shape[0], self.out_dim), dtype=complex)
        for term in self.terms:
            total += term.evaluate_batch(X)
        return total

    def jacobian_at_center(self) -> np.ndarray:
        """Matrix of the linear term, shape (out_dim, in_dim)"""
        if len(self.terms) < 2:
            return np.zeros((self.out_dim, self.in_dim), dtype=complex)
        return self.terms[1].evaluate_batch(np.eye(self.in_dim, dtype=complex)).T

    def __add__(self, other: "PowerSeriesMap") -> "PowerSeriesMap":
        if not np.allclose(self.center.coords, other.center.coords):
            raise SeriesError("can only add series with a common center")
        n = max(self.order, other.order)
        terms = []
        for k in range(n + 1):
            a = self.terms[k] if k <= self.order else None
            b = other.terms[k] if k <= other.order else None
            terms.append(a + b if a is not None and b is not None else (a or b))
        return PowerSeriesMap(self.center, tuple(terms),
                              min(self.radius_estimate, other.radius_estimate),
                              self.is_polynomial and other.is_polynomial)

    def scaled(self, factor: complex) -> "PowerSeriesMap":
        return PowerSeriesMap(self.center, tuple(t.scaled(factor) for t in self.terms),
                              self.radius_estimate, self.is_polynomial)


def _geometric_tail(series: PowerSeriesMap, distance: float) -> float:
    rho = series.radius_estimate
    if series.is_polynomial or math.isinf(rho):
        return 0.0
    theta = distance / rho
    scale = max(t.norm_estimate * rho ** n for n, t in enumerate(series.terms) if n >= 1)
    return scale * theta ** (series.order + 1) / (1.0 - theta)


def eval_series(s: PowerSeriesMap, x) -> TruncatedVector:
    """
    Evaluate the series at ``x`` with a tail bound from the geometric remainder.

    Raises:
        OutOfRadius: If |x - center| >= radius_estimate
        NonFinite: If a term evaluation overflows
    """
    x = _as_vector(x)
    dx = x - s.center
    if dx.dim != s.in_dim:
        dx = dx.padded(s.in_dim)
    distance = dx.norm() + dx.tail_bound
    if not distance < s.radius_estimate:
        raise OutOfRadius(f"|x - center| = {distance:.6g} is not below radius {s.radius_estimate:.6g}")

    total = np.zeros(s.out_dim, dtype=complex)
    magnitude = 0.0
    with np.errstate(over='ignore', invalid='ignore'):
        for term in s.terms:
            value = term.evaluate(dx.coords)
            total += value
            magnitude += float(np.linalg.norm(value))
    if not (np.all(np.isfinite(total)) and np.isfinite(magnitude)):
        raise NonFinite(f"series evaluation overflowed at |x - center| = {distance:.6g}")

    tail = _geometric_tail(s, distance) * (1.0 + 1e-9) + 8.0 * _EPS * magnitude
    return TruncatedVector(total, tail_bound=tail)


def estimate_radius(s: PowerSeriesMap) -> float:
    """
    Cauchy-Hadamard radius 1 / limsup |P_n|^(1/n), fitted on log|P_n| against n.

    Returns math.inf for polynomials.

    Raises:
        InsufficientTerms: With fewer than 4 nonzero terms of degree >= 1
    """
    if s.is_polynomial:
        return math.inf
    degrees, norms = [], []
    for n, term in enumerate(s.terms):
        if n == 0:
            continue
        value = term.norm_estimate
        if value > 0.0:
            degrees.append(n)
            norms.append(value)
    if len(degrees) < 4:
        raise InsufficientTerms(f"only {len(degrees)} nonzero terms; need 4 or a polynomial flag")
    fit = fit_log_linear(degrees, norms)
    radius = math.exp(-fit.slope)
    logger.debug(f"radius fit over degrees {degrees[-1]}..: slope={fit.slope:.6g} radius={radius:.6g}")
    return radius


# --- univariate coefficient arithmetic --------------------------------------

def series_multiply(a: np.ndarray, b: np.ndarray, order: int) -> np.ndarray:
    """Truncated product of coefficient arrays (leading axis = degree)"""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    shape = np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = np.zeros((order + 1,) + shape, dtype=complex)
    for i in range(min(order + 1, a.shape[0])):
        if not np.any(a[i]):
            continue
        upto = min(order + 1 - i, b.shape[0])
        out[i:i + upto] += a[i] * b[:upto]
    return out


def series_reciprocal(a: np.ndarray, order: int) -> np.ndarray:
    """Coefficients of 1/a for a scalar series with a[0] != 0"""
    a = np.asarray(a, dtype=complex)
    if a[0] == 0:
        raise SeriesError("series with zero constant term has no reciprocal")
    out = np.zeros(order + 1, dtype=complex)
    out[0] = 1.0 / a[0]
    for k in range(1, order + 1):
        upto = min(k, a.shape[0] - 1)
        acc = sum(a[j] * out[k - j] for j in range(1, upto + 1))
        out[k] = -acc / a[0]
    return out


def compose_univariate(outer: np.ndarray, inner: np.ndarray, order: int) -> np.ndarray:
    """Horner composition outer(inner(y)); inner must have zero constant term"""
    outer = np.asarray(outer, dtype=complex)
    inner = np.asarray(inner, dtype=complex)
    if inner[0] != 0:
        raise SeriesError("inner series must vanish at the origin")
    result = np.zeros((order + 1,) + outer.shape[1:], dtype=complex)
    inner_col = inner.reshape((inner.shape[0],) + (1,) * (outer.ndim - 1))
    for n in range(outer.shape[0] - 1, -1, -1):
        result = series_multiply(result, inner_col, order)
        result[0] += outer[n]
    return result


def invert_univariate(p: np.ndarray, order: int) -> np.ndarray:
    """
    Newton reversion: coefficients of g with p(g(y)) = y.

    ``p`` must satisfy p[0] == 0 and p[1] != 0.
    """
    p = np.asarray(p, dtype=complex)
    if p.shape[0] < 2 or p[0] != 0 or p[1] == 0:
        raise SeriesError("reversion needs p(0) = 0 and p'(0) != 0")
    dp = np.array([k * p[k] for k in range(1, p.shape[0])], dtype=complex)
    identity = np.zeros(order + 1, dtype=complex)
    identity[1] = 1.0
    g = np.zeros(order + 1, dtype=complex)
    g[1] = 1.0 / p[1]
    for _ in range(max(2, math.ceil(math.log2(order + 1)) + 2)):
        residual = compose_univariate(p, g, order) - identity
        slope = compose_univariate(dp, g, order)
        step = series_multiply(residual, series_reciprocal(slope, order), order)
        g = g - step
        if np.max(np.abs(step)) < 1e-17:
            break
    return g


def univariate_coefficients(s: PowerSeriesMap) -> np.ndarray:
    """Coefficient array (N+1, out_dim) of a series in one variable"""
    if s.in_dim != 1:
        raise SeriesError("univariate coefficients need a one-variable series")
    one = np.ones((1, 1), dtype=complex)
    return np.array([t.evaluate_batch(one)[0] for t in s.terms])


# --- recentering, composition and inversion ----------------------------------

def _ray_coefficients(g: Callable[[np.ndarray], np.ndarray], base: np.ndarray,
                      directions: np.ndarray, order: int, nodes: int) -> np.ndarray:
    """
    Taylor coefficients in t of g(base + t * x) for each row x of ``directions``.

    Returns shape (S, order + 1, out). Exact up to roundoff when g restricted
    to the ray is a polynomial of degree < nodes.
    """
    omega = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    S, m = directions.shape
    points = base[None, None, :] + omega[None, :, None] * directions[:, None, :]
    values = np.asarray(g(points.reshape(S * nodes, m)), dtype=complex).reshape(S, nodes, -1)
    spectrum = np.fft.fft(values, axis=1) / nodes
    return spectrum[:, :order + 1, :]


def _ray_terms(g: Callable[[np.ndarray], np.ndarray], base: np.ndarray, order: int,
               in_dim: int, out_dim: int, nodes: int) -> Tuple[HomogeneousMap, ...]:
    terms = [HomogeneousMap.constant(np.asarray(g(base[None, :]), dtype=complex)[0])]
    for d in range(1, order + 1):
        def part(X: np.ndarray, d: int = d) -> np.ndarray:
            return _ray_coefficients(g, base, X, order, nodes)[:, d, :]
        terms.append(HomogeneousMap.from_callable(part, d, in_dim, out_dim))
    return tuple(terms)


def _attach_radius(center: TruncatedVector, terms: Tuple[HomogeneousMap, ...],
                   fallback: float) -> PowerSeriesMap:
    try:
        return PowerSeriesMap.build(center, terms)
    except InsufficientTerms:
        return PowerSeriesMap.build(center, terms, radius=fallback)


def shift_center(s: PowerSeriesMap, new_center) -> PowerSeriesMap:
    """
    Re-expand ``s`` at ``new_center``.

    Polynomials are re-expanded exactly. For other series the new radius is
    the old one minus the shift, and the new terms only see the truncated
    series, so they are approximations.

    Raises:
        OutOfRadius: If the new center lies outside the radius
    """
    new_center = _as_vector(new_center).padded(s.in_dim)
    shift = (new_center - s.center).norm()
    if not s.is_polynomial and not shift < s.radius_estimate:
        raise OutOfRadius(f"new center at distance {shift:.6g} outside radius {s.radius_estimate:.6g}")
    nodes = next_power_of_two(s.order + 1)
    terms = _ray_terms(s.evaluate_batch, new_center.coords, s.order, s.in_dim, s.out_dim, nodes)
    radius = math.inf if s.is_polynomial else s.radius_estimate - shift
    return PowerSeriesMap(new_center, terms, radius, s.is_polynomial)


def derivative(s: PowerSeriesMap, x) -> np.ndarray:
    """Frechet derivative of ``s`` at ``x`` as an (out_dim, in_dim) matrix"""
    x = _as_vector(x).padded(s.in_dim)
    if np.allclose(x.coords, s.center.coords, rtol=0.0, atol=0.0):
        return s.jacobian_at_center()
    nodes = next_power_of_two(s.order + 1)
    coeffs = _ray_coefficients(s.evaluate_batch, x.coords,
                               np.eye(s.in_dim, dtype=complex), 1, nodes)
    return coeffs[:, 1, :].T


def compose(outer: PowerSeriesMap, inner: PowerSeriesMap) -> PowerSeriesMap:
    """
    Substitute ``inner`` into ``outer``; inner's value at its center must be outer's center.

    Two polynomials compose exactly (up to degree 64). Otherwise the result is
    truncated at the smaller order, where the truncated terms are still exact.
    """
    if inner.out_dim != outer.in_dim:
        raise SeriesError(f"inner output {inner.out_dim} != outer input {outer.in_dim}")
    inner_value = inner.terms[0].evaluate(np.zeros(inner.in_dim))
    if not np.allclose(inner_value, outer.center.coords, atol=1e-12):
        raise SeriesError("inner series must map its center to the outer center")

    def g(X: np.ndarray) -> np.ndarray:
        return outer.evaluate_batch(inner.evaluate_batch(X))

    if outer.is_polynomial and inner.is_polynomial and outer.order * inner.order <= 64:
        order = outer.order * inner.order
        nodes = next_power_of_two(order + 1)
        terms = _ray_terms(g, inner.center.coords, order, inner.in_dim, outer.out_dim, nodes)
        return PowerSeriesMap(inner.center, terms, math.inf, True)
    order = min(outer.order, inner.order)
    nodes = next_power_of_two(outer.order * inner.order + 1)
    terms = _ray_terms(g, inner.center.coords, order, inner.in_dim, outer.out_dim, nodes)
    return _attach_radius(inner.center, terms, inner.radius_estimate)


def invert_series(s: PowerSeriesMap) -> PowerSeriesMap:
    """
    Local inverse of a square series with invertible linear part.

    Solves h = L^-1 (t y - sum_{n>=2} P_n(h)) order by order along each ray
    y, so the degree-d term of the inverse at y is the t^d coefficient.

    Raises:
        SeriesError: If the map is not square or its linear part is singular
    """
    if s.in_dim != s.out_dim:
        raise SeriesError(f"cannot invert a map from C^{s.in_dim} to C^{s.out_dim}")
    L = s.jacobian_at_center()
    if np.linalg.cond(L) > 1e12:
        raise SeriesError("linear part is singular; the series is not locally invertible")
    L_inv = np.linalg.inv(L)
    order = s.order
    nodes = next_power_of_two(order * order + 1)
    omega = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    powers = omega[None, :] ** np.arange(order + 1)[:, None]
    higher = [t for t in s.terms[2:]]
    m = s.in_dim

    def inverse_ray(Y: np.ndarray) -> np.ndarray:
        S = Y.shape[0]
        h = np.zeros((S, order + 1, m), dtype=complex)
        for _ in range(order):
            on_nodes = np.einsum('sdm,dk->skm', h, powers).reshape(S * nodes, m)
            nonlinear = np.zeros((S * nodes, m), dtype=complex)
            for term in higher:
                nonlinear += term.evaluate_batch(on_nodes)
            nl = np.fft.fft(nonlinear.reshape(S, nodes, m), axis=1)[:, :order + 1, :] / nodes
            rhs = -nl
            rhs[:, 1, :] += Y
            h = np.einsum('ij,sdj->sdi', L_inv, rhs)
            h[:, 0, :] = 0.0
        return h

    value = s.terms[0].evaluate(np.zeros(m))
    terms = [HomogeneousMap.constant(s.center.coords)]
    for d in range(1, order + 1):
        def part(Y: np.ndarray, d: int = d) -> np.ndarray:
            return inverse_ray(Y)[:, d, :]
        known = float(np.linalg.norm(L_inv, 2)) if d == 1 else None
        terms.append(HomogeneousMap.from_callable(part, d, m, m, known))
    center = TruncatedVector(value)
    if all(t.is_zero() for t in higher):
        return PowerSeriesMap(center, tuple(terms), math.inf, True)
    return _attach_radius(center, tuple(terms), s.radius_estimate)
