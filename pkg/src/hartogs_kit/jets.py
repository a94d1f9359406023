"""
Polynomial jets in fibre variables with Laurent coefficients in the base.

A scalar jet of degree N is sum_beta c_beta(z) w^beta over |beta| <= N,
where every c_beta is a Laurent polynomial sum_{|k| <= L} c_{beta,k} z^k.
Coordinate changes between charts over an annulus are stacks of such jets,
one per output coordinate (z' first, then w'). Products convolve the Laurent
axis over all monomial pairs at once and drop everything above degree N.
"""

import logging
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations_with_replacement
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .errors import RoydenError

logger = logging.getLogger(__name__)

DEFAULT_BAND = 32
DEFAULT_DEGREE = 8


@dataclass(frozen=True)
class JetSpace:
    """Shape of a jet: fibre dimension M, degree N in w, Laurent band L in z"""

    fibre_dim: int
    degree: int
    band: int = DEFAULT_BAND

    def __post_init__(self):
        if self.fibre_dim < 1:
            raise RoydenError(f"fibre dimension must be >= 1, got {self.fibre_dim}")
        if self.degree < 1:
            raise RoydenError(f"jet degree must be >= 1, got {self.degree}")
        if self.band < 1:
            raise RoydenError(f"Laurent band must be >= 1, got {self.band}")

    @cached_property
    def monomials(self) -> Tuple[Tuple[int, ...], ...]:
        """Exponents ordered by total degree"""
        out = []
        for d in range(self.degree + 1):
            for idx in combinations_with_replacement(range(self.fibre_dim), d):
                out.append(tuple(idx.count(i) for i in range(self.fibre_dim)))
        return tuple(out)

    @cached_property
    def index(self) -> Dict[Tuple[int, ...], int]:
        return {beta: i for i, beta in enumerate(self.monomials)}

    @cached_property
    def exponents(self) -> np.ndarray:
        return np.array(self.monomials, dtype=int)

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.exponents.sum(axis=1)

    @property
    def size(self) -> int:
        return len(self.monomials)

    @property
    def width(self) -> int:
        return 2 * self.band + 1

    @cached_property
    def powers(self) -> np.ndarray:
        return np.arange(-self.band, self.band + 1)

    def column(self, power: int) -> int:
        if abs(power) > self.band:
            raise RoydenError(f"power {power} outside the Laurent band {self.band}")
        return power + self.band

    @cached_property
    def product_table(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(left row, right row, target row) for every monomial pair within degree N"""
        rows, cols, targets = [], [], []
        for i, a in enumerate(self.monomials):
            for j, b in enumerate(self.monomials):
                if sum(a) + sum(b) <= self.degree:
                    rows.append(i)
                    cols.append(j)
                    targets.append(self.index[tuple(x + y for x, y in zip(a, b))])
        return np.array(rows), np.array(cols), np.array(targets)

    def degree_rows(self, lo: int, hi: Optional[int] = None) -> np.ndarray:
        hi = lo if hi is None else hi
        return (self.degrees >= lo) & (self.degrees <= hi)


@lru_cache(maxsize=32)
def jet_space(fibre_dim: int, degree: int = DEFAULT_DEGREE, band: int = DEFAULT_BAND) -> JetSpace:
    """Shared JetSpace instances so product tables are built once"""
    return JetSpace(fibre_dim, degree, band)


# --- raw coefficient arithmetic on (size, width) arrays ------------------------

def _multiply(space: JetSpace, a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Truncated product of two scalar jets.

    Only nonzero rows and Laurent columns take part, so exact zeros stay
    exact. Returns the product and the l1 mass that left the Laurent band.
    """
    rows, cols, targets = space.product_table
    live_a = np.any(a != 0, axis=1)
    live_b = np.any(b != 0, axis=1)
    keep = live_a[rows] & live_b[cols]
    out = np.zeros((space.size, space.width), dtype=complex)
    if not np.any(keep):
        return out, 0.0
    rows, cols, targets = rows[keep], cols[keep], targets[keep]

    W = space.width
    full = np.zeros((rows.shape[0], 2 * W - 1), dtype=complex)
    right = b[cols]
    for k in np.flatnonzero(np.any(a[rows] != 0, axis=0)):
        full[:, k:k + W] += a[rows, k][:, None] * right
    collected = np.zeros((space.size, 2 * W - 1), dtype=complex)
    np.add.at(collected, targets, full)

    # column j of the full product carries power j - 2L
    L = space.band
    out[:] = collected[:, L:L + W]
    discarded = float(np.sum(np.abs(collected[:, :L])) + np.sum(np.abs(collected[:, L + W:])))
    return out, discarded


def _dz(space: JetSpace, a: np.ndarray) -> Tuple[np.ndarray, float]:
    """d/dz of every Laurent coefficient; the -L-1 power leaves the band"""
    powers = space.powers
    scaled = a * powers[None, :]
    out = np.zeros_like(a)
    out[:, :-1] = scaled[:, 1:]
    return out, float(np.sum(np.abs(scaled[:, 0])))


def _constant_row(space: JetSpace, band_values: np.ndarray) -> np.ndarray:
    row = np.zeros((space.size, space.width), dtype=complex)
    row[0] = band_values
    return row


@dataclass(frozen=True, eq=False)
class JetMap:
    """
    A stack of scalar jets, shape (components, size, width).

    As a coordinate change component 0 is z' and components 1..M are w'.
    ``discarded`` accumulates Laurent mass dropped by products.
    """

    space: JetSpace
    coeffs: np.ndarray
    discarded: float = 0.0

    def __post_init__(self):
        expected = (self.space.size, self.space.width)
        if self.coeffs.ndim != 3 or self.coeffs.shape[1:] != expected:
            raise RoydenError(f"jet coefficients of shape {self.coeffs.shape} do not match {expected}")

    # --- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, space: JetSpace, components: Optional[int] = None) -> "JetMap":
        components = space.fibre_dim + 1 if components is None else components
        return cls(space, np.zeros((components, space.size, space.width), dtype=complex))

    @classmethod
    def identity(cls, space: JetSpace) -> "JetMap":
        coeffs = np.zeros((space.fibre_dim + 1, space.size, space.width), dtype=complex)
        coeffs[0, 0, space.column(1)] = 1.0
        for i in range(space.fibre_dim):
            beta = tuple(1 if j == i else 0 for j in range(space.fibre_dim))
            coeffs[1 + i, space.index[beta], space.column(0)] = 1.0
        return cls(space, coeffs)

    @classmethod
    def from_terms(cls, space: JetSpace, terms: Dict[Tuple[int, Tuple[int, ...], int], complex],
                   base: str = 'identity') -> "JetMap":
        """
        Add ``{(component, exponent, power): coefficient}`` to the identity or to zero.

        Raises:
            RoydenError: If an exponent exceeds the jet degree
        """
        jet = cls.identity(space) if base == 'identity' else cls.zeros(space)
        coeffs = jet.coeffs.copy()
        for (component, beta, power), value in terms.items():
            beta = tuple(int(b) for b in beta)
            if beta not in space.index:
                raise RoydenError(f"exponent {beta} is not a monomial of degree <= {space.degree}")
            coeffs[component, space.index[beta], space.column(power)] += value
        return cls(space, coeffs)

    @property
    def components(self) -> int:
        return self.coeffs.shape[0]

    # --- arithmetic -------------------------------------------------------

    def _check(self, other: "JetMap") -> None:
        if other.space != self.space or other.components != self.components:
            raise RoydenError("jets of different shape")

    def __add__(self, other: "JetMap") -> "JetMap":
        self._check(other)
        return JetMap(self.space, self.coeffs + other.coeffs, self.discarded + other.discarded)

    def __sub__(self, other: "JetMap") -> "JetMap":
        self._check(other)
        return JetMap(self.space, self.coeffs - other.coeffs, self.discarded + other.discarded)

    def scaled(self, factor: complex) -> "JetMap":
        return JetMap(self.space, self.coeffs * factor, self.discarded * abs(factor))

    def degree_part(self, lo: int, hi: Optional[int] = None) -> "JetMap":
        """Keep monomials of total degree in [lo, hi] (hi defaults to lo)"""
        mask = self.space.degree_rows(lo, hi)
        return JetMap(self.space, np.where(mask[None, :, None], self.coeffs, 0.0), self.discarded)

    def is_zero(self, tolerance: float = 0.0) -> bool:
        return self.max_abs() <= tolerance

    def max_abs(self, lo: int = 0, hi: Optional[int] = None) -> float:
        """Largest |coefficient| over total degrees lo..hi"""
        hi = self.space.degree if hi is None else hi
        mask = self.space.degree_rows(lo, hi)
        block = self.coeffs[:, mask, :]
        return float(np.max(np.abs(block))) if block.size else 0.0

    def min_degree(self) -> Optional[int]:
        live = np.any(self.coeffs != 0, axis=(0, 2))
        if not np.any(live):
            return None
        return int(np.min(self.space.degrees[live]))

    # --- evaluation -------------------------------------------------------

    def _band_powers(self, z: np.ndarray, coeffs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        live = np.flatnonzero(np.any(coeffs != 0, axis=(0, 1)))
        powers = self.space.powers[live]
        return z[:, None] ** powers[None, :], live

    def coefficients_at(self, z, rows: Optional[np.ndarray] = None) -> np.ndarray:
        """Values c_beta(z) for the selected monomial rows, shape (P, components, rows)"""
        z = np.asarray(z, dtype=complex).reshape(-1)
        coeffs = self.coeffs if rows is None else self.coeffs[:, rows, :]
        zp, live = self._band_powers(z, coeffs)
        if live.size == 0:
            return np.zeros((z.shape[0],) + coeffs.shape[:2], dtype=complex)
        return np.einsum('pk,csk->pcs', zp, coeffs[:, :, live])

    def _monomials_at(self, w: np.ndarray) -> np.ndarray:
        return np.prod(w[:, None, :] ** self.space.exponents[None, :, :], axis=2)

    def evaluate(self, Z) -> np.ndarray:
        """
        Evaluate at points (P, 1 + M); returns (P, components).

        Negative Laurent powers make z = 0 a pole; such jets only make sense
        on the annulus.
        """
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        if Z.shape[1] != self.space.fibre_dim + 1:
            raise RoydenError(f"points of dimension {Z.shape[1]} for a jet over C x C^{self.space.fibre_dim}")
        at_z = self.coefficients_at(Z[:, 0])
        return np.einsum('pcs,ps->pc', at_z, self._monomials_at(Z[:, 1:]))

    def jacobian(self, Z) -> np.ndarray:
        """Complex Jacobian (P, components, 1 + M) of the truncated jet"""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        P, M = Z.shape[0], self.space.fibre_dim
        out = np.zeros((P, self.components, M + 1), dtype=complex)
        mono = self._monomials_at(Z[:, 1:])
        derivative = np.stack([_dz(self.space, c)[0] for c in self.coeffs])
        out[:, :, 0] = np.einsum('pcs,ps->pc', JetMap(self.space, derivative).coefficients_at(Z[:, 0]), mono)
        at_z = self.coefficients_at(Z[:, 0])
        exps = self.space.exponents
        for i in range(M):
            lowered = np.maximum(exps - np.eye(M, dtype=int)[i], 0)
            partial = exps[:, i][None, :] * np.prod(Z[:, 1:][:, None, :] ** lowered[None, :, :], axis=2)
            out[:, :, 1 + i] = np.einsum('pcs,ps->pc', at_z, partial)
        return out

    # --- Laurent coefficient functions for one degree -------------------------

    def coefficient_function(self, n: int) -> Callable[[np.ndarray], np.ndarray]:
        """z -> all degree-n coefficients c_beta(z) of all components, flattened to (P, m)"""
        rows = np.flatnonzero(self.space.degree_rows(n))
        jet = self

        def evaluate(z: np.ndarray) -> np.ndarray:
            values = jet.coefficients_at(z, rows)
            return values.reshape(values.shape[0], -1)

        return evaluate

    def with_degree_coefficients(self, n: int, laurent: np.ndarray) -> "JetMap":
        """
        Replace the degree-n block with Laurent coefficients of shape
        (components * rows_n, width), as flattened by ``coefficient_function``.
        """
        rows = np.flatnonzero(self.space.degree_rows(n))
        coeffs = self.coeffs.copy()
        coeffs[:, rows, :] = np.asarray(laurent, dtype=complex).reshape(self.components, rows.shape[0], -1)
        return JetMap(self.space, coeffs, self.discarded)

    # --- composition and inversion -------------------------------------------

    def compose(self, inner: "JetMap") -> "JetMap":
        """
        self o inner, truncated at the jet degree.

        ``inner`` must be a coordinate change whose z-component is z plus terms
        of w-degree >= 1; coefficients of ``self`` are re-expanded at the shifted
        base point by Taylor's formula in z, which then terminates.

        Raises:
            RoydenError: If inner moves the zero section in the base direction
        """
        space = self.space
        if inner.space != space or inner.components != space.fibre_dim + 1:
            raise RoydenError("inner jet must be a coordinate change on the same space")
        shift = inner.coeffs[0].copy()
        shift[0, space.column(1)] -= 1.0
        if np.max(np.abs(shift[0])) > 1e-12:
            raise RoydenError("inner map moves the base point of the zero section")
        if np.max(np.abs(inner.coeffs[1:, 0, :])) > 1e-12:
            raise RoydenError("inner map moves the zero section off w = 0")
        shift[0] = 0.0
        live_shift = np.any(shift != 0, axis=1)
        lowest = int(np.min(space.degrees[live_shift])) if np.any(live_shift) else None
        discarded = self.discarded + inner.discarded

        shift_powers = [_constant_row(space, np.eye(1, space.width, space.column(0))[0])]
        if lowest is not None:
            for _ in range(space.degree // lowest):
                product, lost = _multiply(space, shift_powers[-1], shift)
                shift_powers.append(product)
                discarded += lost

        fibre = inner.coeffs[1:]
        fibre_powers: Dict[Tuple[int, ...], np.ndarray] = {(0,) * space.fibre_dim: shift_powers[0]}

        def fibre_power(beta: Tuple[int, ...]) -> np.ndarray:
            nonlocal discarded
            if beta in fibre_powers:
                return fibre_powers[beta]
            i = next(j for j, b in enumerate(beta) if b)
            lower = tuple(b - 1 if j == i else b for j, b in enumerate(beta))
            product, lost = _multiply(space, fibre_power(lower), fibre[i])
            discarded += lost
            fibre_powers[beta] = product
            return product

        out = np.zeros_like(self.coeffs)
        for c in range(self.components):
            for row in np.flatnonzero(np.any(self.coeffs[c] != 0, axis=1)):
                beta = space.monomials[row]
                room = space.degree - sum(beta)
                taylor = np.zeros((space.size, space.width), dtype=complex)
                derivative = self.coeffs[c, row].copy()
                for j in range(len(shift_powers)):
                    if j:
                        if lowest is None or j * lowest > room:
                            break
                        derivative, lost = _dz(space, derivative[None, :])
                        derivative = derivative[0] / j
                        discarded += lost
                    if not np.any(derivative):
                        break
                    term, lost = _multiply(space, shift_powers[j], _constant_row(space, derivative))
                    taylor += term
                    discarded += lost
                product, lost = _multiply(space, taylor, fibre_power(beta))
                out[c] += product
                discarded += lost
        return JetMap(space, out, discarded)

    def inverse(self, tolerance: float = 1e-12) -> "JetMap":
        """
        Inverse of id + h with h of w-degree >= 2, by the fixed point X = id - h o X.

        Raises:
            RoydenError: If the map is not the identity through w-degree 1
        """
        identity = JetMap.identity(self.space)
        h = self - identity
        if h.max_abs(0, 1) > tolerance:
            raise RoydenError(f"inverse needs identity linear part; defect {h.max_abs(0, 1):.3e}")
        h = h.degree_part(2, self.space.degree)
        X = identity
        for _ in range(self.space.degree):
            updated = identity - h.compose(X)
            change = float(np.max(np.abs(updated.coeffs - X.coeffs)))
            X = updated
            if change == 0.0:
                break
        return X

    # --- certification --------------------------------------------------------

    def degree_norms(self, radii, nodes: int = 128) -> np.ndarray:
        """
        Per-degree bound max_z sum_beta |c_beta(z)| over circles |z| = radius.

        Bounds the sup over the unit ball in w of the degree-n part; entry n
        of the returned array belongs to degree n.
        """
        theta = np.exp(2j * np.pi * np.arange(nodes) / nodes)
        z = np.concatenate([radius * theta for radius in np.atleast_1d(radii)])
        at_z = self.coefficients_at(z)
        magnitude = np.linalg.norm(at_z, axis=1)
        norms = np.zeros(self.space.degree + 1)
        for n in range(self.space.degree + 1):
            rows = self.space.degree_rows(n)
            norms[n] = float(np.max(np.sum(magnitude[:, rows], axis=1)))
        return norms


def laurent_band(f: Callable[[np.ndarray], np.ndarray], space: JetSpace, radius: float,
                 nodes: Optional[int] = None) -> np.ndarray:
    """
    Laurent coefficients over the jet band of a function sampled on |z| = radius.

    Returns shape (m, width) for f returning (P, m).
    """
    nodes = nodes or 4 * space.width
    nodes = 1 << (nodes - 1).bit_length()
    zeta = radius * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    values = np.asarray(f(zeta), dtype=complex).reshape(nodes, -1)
    spectrum = np.fft.fft(values, axis=0) / nodes
    powers = space.powers
    return (spectrum[powers % nodes] * radius ** (-powers.astype(float))[:, None]).T
