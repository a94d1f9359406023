"""
dbar solver with sup-norm estimates on planar domains, and the additive
Cousin problem over finite covers of a neighbourhood of the closed unit disk.

Grid functions live on a square lattice of cell centers with fractional
cell weights along the boundary. The Cauchy transform

    u(z) = (1/pi) sum_cells g(zeta) w(zeta) h^2 / (z - zeta)

is a lattice convolution, evaluated with FFTs. The singular cell
integrates to zero exactly by symmetry of the square.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import fftconvolve

from .errors import (
    CocycleViolation,
    DbarError,
    DegenerateDomain,
    NonFinite,
    ResolutionTooCoarse,
)
from .quadrature import CircleSampler, circle_coefficients, cr_residual, next_power_of_two, sample_grid

logger = logging.getLogger(__name__)

SUBSAMPLES = 8
FEATURE_CELLS = 64
MIN_FEATURE_CELLS = 32
BOUNDARY_MARGIN_CELLS = 8
RESIDUAL_FACTOR = 10.0
SELF_CELL_INTEGRAL = 4.0 * math.log(1.0 + math.sqrt(2.0))  # int over unit square of 1/|x|, times 1/h
DEFAULT_COUSIN_TOLERANCE = 1e-8

GridSource = object  # callable on complex points or an array on the lattice


@dataclass(frozen=True, eq=False)
class PlanarDomain:
    """
    Disk, annulus or rectangle with a quadrature lattice.

    ``radius`` is the disk radius or outer annulus radius; rectangles use
    ``width`` and ``height``. The lattice spacing defaults to 1/64 of the
    smallest feature and may not exceed 1/32 of it.
    """

    kind: str
    center: complex = 0j
    radius: float = 1.0
    inner_radius: float = 0.0
    width: float = 0.0
    height: float = 0.0
    spacing: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ('disk', 'annulus', 'rectangle'):
            raise DbarError(f"unknown planar domain kind {self.kind!r}")
        if self.area <= 0.0:
            raise DegenerateDomain(f"{self.kind} has zero area")
        feature = self.feature
        spacing = feature / FEATURE_CELLS if self.spacing is None else float(self.spacing)
        if not spacing > 0:
            raise DbarError(f"grid spacing must be positive, got {spacing}")
        if spacing > feature / MIN_FEATURE_CELLS * (1.0 + 1e-12):
            raise ResolutionTooCoarse(f"spacing {spacing:.4g} exceeds 1/{MIN_FEATURE_CELLS} "
                                      f"of the smallest feature {feature:.4g}")
        object.__setattr__(self, 'spacing', spacing)

    @classmethod
    def disk(cls, radius: float, center: complex = 0j, spacing: Optional[float] = None) -> "PlanarDomain":
        return cls('disk', complex(center), float(radius), spacing=spacing)

    @classmethod
    def annulus(cls, inner: float, outer: float, center: complex = 0j,
                spacing: Optional[float] = None) -> "PlanarDomain":
        return cls('annulus', complex(center), float(outer), float(inner), spacing=spacing)

    @classmethod
    def rectangle(cls, width: float, height: float, center: complex = 0j,
                  spacing: Optional[float] = None) -> "PlanarDomain":
        return cls('rectangle', complex(center), width=float(width), height=float(height),
                   spacing=spacing)

    @property
    def area(self) -> float:
        if self.kind == 'disk':
            return math.pi * max(self.radius, 0.0) ** 2
        if self.kind == 'annulus':
            if self.inner_radius < 0 or self.inner_radius >= self.radius:
                return 0.0
            return math.pi * (self.radius ** 2 - self.inner_radius ** 2)
        return max(self.width, 0.0) * max(self.height, 0.0)

    @property
    def feature(self) -> float:
        if self.kind == 'disk':
            return self.radius
        if self.kind == 'annulus':
            return self.radius - self.inner_radius
        return min(self.width, self.height)

    @property
    def half_extent(self) -> Tuple[float, float]:
        if self.kind == 'rectangle':
            return self.width / 2.0, self.height / 2.0
        return self.radius, self.radius

    def distance_to_boundary(self, z) -> np.ndarray:
        """Signed distance, positive inside"""
        z = np.asarray(z, dtype=complex) - self.center
        if self.kind == 'disk':
            return self.radius - np.abs(z)
        if self.kind == 'annulus':
            rho = np.abs(z)
            return np.minimum(rho - self.inner_radius, self.radius - rho)
        hx, hy = self.half_extent
        return np.minimum(hx - np.abs(z.real), hy - np.abs(z.imag))

    def contains(self, z) -> np.ndarray:
        return self.distance_to_boundary(z) > 0

    @cached_property
    def lattice(self) -> Tuple[np.ndarray, np.ndarray]:
        """Cell centers (ny, nx) and the fraction of each cell inside the domain"""
        h = self.spacing
        hx, hy = self.half_extent
        kx, ky = int(math.ceil(hx / h)) + 1, int(math.ceil(hy / h)) + 1
        xs = self.center.real + h * np.arange(-kx, kx + 1)
        ys = self.center.imag + h * np.arange(-ky, ky + 1)
        X, Y = np.meshgrid(xs, ys)
        points = X + 1j * Y
        offsets = (np.arange(SUBSAMPLES) + 0.5) / SUBSAMPLES - 0.5
        weights = np.zeros(points.shape)
        for a in offsets:
            for b in offsets:
                weights += self.contains(points + h * (a + 1j * b))
        weights /= SUBSAMPLES ** 2
        return points, weights

    @property
    def mask(self) -> np.ndarray:
        return self.lattice[1] > 0

    def grid_points(self) -> np.ndarray:
        """Lattice points whose cell meets the domain"""
        points, weights = self.lattice
        return points[weights > 0]

    def interior_mask(self, margin: Optional[float] = None) -> np.ndarray:
        margin = BOUNDARY_MARGIN_CELLS * self.spacing if margin is None else margin
        return self.distance_to_boundary(self.lattice[0]) >= margin


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on a domain lattice, shape (ny, nx) or (ny, nx, m)"""

    domain: PlanarDomain
    values: np.ndarray
    residual: float = 0.0
    expected_bound: float = 0.0

    def sup_norm(self, mask: Optional[np.ndarray] = None) -> float:
        mask = self.domain.mask if mask is None else mask
        magnitude = np.abs(self.values) if self.values.ndim == 2 else np.linalg.norm(self.values, axis=2)
        return float(np.max(magnitude[mask])) if np.any(mask) else 0.0


def _as_columns(values: np.ndarray, count: int) -> np.ndarray:
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    if count == 0:
        return values.reshape(0, max(1, int(np.prod(values.shape[1:]))))
    return values.reshape(count, -1)


def _grid_values(g: GridSource, domain: PlanarDomain) -> np.ndarray:
    points, weights = domain.lattice
    if callable(g):
        flat = points.reshape(-1)
        raw = np.asarray(g(flat), dtype=complex)
        values = raw.reshape(points.shape + raw.shape[1:])
    else:
        values = np.asarray(g, dtype=complex)
        if values.shape[:2] != points.shape:
            raise DbarError(f"grid function shape {values.shape[:2]} != lattice {points.shape}")
        values = values.copy()
    outside = weights == 0
    values[outside] = 0.0
    if not np.all(np.isfinite(values)):
        raise NonFinite("grid function has non-finite values on the domain")
    return values


def dbar_field(values: np.ndarray, spacing: float) -> np.ndarray:
    """Centered-difference d/dzbar on the lattice; border rows and columns are NaN"""
    values = np.asarray(values, dtype=complex)
    out = np.full(values.shape, np.nan + 0j, dtype=complex)
    dx = (values[1:-1, 2:] - values[1:-1, :-2]) / (2.0 * spacing)
    dy = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2.0 * spacing)
    out[1:-1, 1:-1] = 0.5 * (dx + 1j * dy)
    return out


def dbar_residual(domain: PlanarDomain, u, g, margin: Optional[float] = None) -> float:
    """Max |dbar u - g| over lattice points at least ``margin`` inside the domain (default 8 cells)"""
    u = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=complex)
    g = _grid_values(g, domain) if callable(g) else np.asarray(g, dtype=complex)
    diff = dbar_field(u, domain.spacing) - g
    keep = domain.interior_mask(margin)
    keep[0, :] = keep[-1, :] = False
    keep[:, 0] = keep[:, -1] = False
    if not np.any(keep):
        return 0.0
    magnitude = np.abs(diff) if diff.ndim == 2 else np.linalg.norm(diff, axis=2)
    return float(np.max(magnitude[keep]))


def _kernel_offsets(shape: Tuple[int, int], spacing: float) -> np.ndarray:
    ny, nx = shape
    dy = spacing * np.arange(-(ny - 1), ny)
    dx = spacing * np.arange(-(nx - 1), nx)
    return dx[None, :] + 1j * dy[:, None]


def _convolve(weighted: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    ny, nx = weighted.shape[:2]
    if weighted.ndim == 3:
        kernel = kernel[:, :, None]
        full = fftconvolve(weighted, kernel, axes=(0, 1))
    else:
        full = fftconvolve(weighted, kernel)
    return full[ny - 1:2 * ny - 1, nx - 1:2 * nx - 1]


def cauchy_transform(g: GridSource, domain: PlanarDomain, check: bool = True) -> GridFunction:
    """
    Solve dbar u = g on a planar domain by the Cauchy transform.

    Args:
        g: Callable on complex points (vectorized) or values on ``domain.lattice``
        domain: Planar domain with its lattice
        check: Raise when the a-posteriori dbar residual is too large

    Returns:
        GridFunction with the residual and the grid-order bound it was held to

    Raises:
        NonFinite: If g is not finite on the domain
        ResolutionTooCoarse: If the residual exceeds 10x the expected bound
    """
    points, weights = domain.lattice
    h = domain.spacing
    values = _grid_values(g, domain)

    offsets = _kernel_offsets(points.shape, h)
    with np.errstate(divide='ignore', invalid='ignore'):
        kernel = 1.0 / (np.pi * offsets)
    kernel[points.shape[0] - 1, points.shape[1] - 1] = 0.0

    cell = weights * h * h
    weighted = values * (cell[:, :, None] if values.ndim == 3 else cell)
    u = _convolve(weighted, kernel)

    g_sup = float(np.max(np.abs(values))) if values.size else 0.0
    residual = dbar_residual(domain, u, values)
    expected = h * g_sup
    logger.debug(f"cauchy transform on {domain.kind}: h={h:.4g} residual={residual:.3e} "
                 f"expected={expected:.3e}")
    if check and residual > RESIDUAL_FACTOR * expected and residual > 1e-12:
        raise ResolutionTooCoarse(f"dbar residual {residual:.3e} exceeds "
                                  f"{RESIDUAL_FACTOR:g}x the grid bound {expected:.3e}")
    return GridFunction(domain, u, residual, expected)


def sup_constant(domain: PlanarDomain) -> float:
    """
    Numerical sup over lattice points of (1/pi) * integral over D of dA / |zeta - z|.

    The singular cell is integrated exactly: over a square of side h the
    integral of 1/|x| is 4 h ln(1 + sqrt 2).
    """
    points, weights = domain.lattice
    h = domain.spacing
    offsets = _kernel_offsets(points.shape, h)
    with np.errstate(divide='ignore'):
        kernel = 1.0 / (np.pi * np.abs(offsets))
    kernel[points.shape[0] - 1, points.shape[1] - 1] = SELF_CELL_INTEGRAL / (np.pi * h)
    potential = _convolve(weights * h * h, kernel.astype(complex)).real
    value = float(np.max(potential[weights > 0]))
    logger.debug(f"sup constant of {domain.kind} (h={h:.4g}): {value:.6g}")
    return value


# --- covers and partitions of unity ------------------------------------------

@dataclass(frozen=True)
class CoverSet:
    """An open disk or annulus of a cover"""

    kind: str
    center: complex = 0j
    radius: float = 1.0
    inner_radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ('disk', 'annulus'):
            raise DbarError(f"cover sets are disks or annuli, got {self.kind!r}")
        if self.radius <= 0 or (self.kind == 'annulus' and not 0 <= self.inner_radius < self.radius):
            raise DegenerateDomain(f"degenerate cover set {self}")

    def distance_to_boundary(self, z) -> np.ndarray:
        rho = np.abs(np.asarray(z, dtype=complex) - self.center)
        if self.kind == 'disk':
            return self.radius - rho
        return np.minimum(rho - self.inner_radius, self.radius - rho)

    def contains(self, z) -> np.ndarray:
        return self.distance_to_boundary(z) > 0

    def bump(self, z) -> Tuple[np.ndarray, np.ndarray]:
        """
        C^2 bump (1 - t^2)^3 in the normalized distance t, and its dbar.

        t is |z - c| / R for disks and the offset from the mid-radius over
        the half width for annuli; the bump vanishes outside the set.
        """
        w = np.asarray(z, dtype=complex) - self.center
        rho = np.abs(w)
        if self.kind == 'disk':
            mid, half = 0.0, self.radius
        else:
            mid, half = 0.5 * (self.radius + self.inner_radius), 0.5 * (self.radius - self.inner_radius)
        t = (rho - mid) / half
        inside = np.abs(t) < 1.0
        one_minus = np.where(inside, 1.0 - t * t, 0.0)
        value = one_minus ** 3
        derivative = -6.0 * t * one_minus ** 2
        with np.errstate(divide='ignore', invalid='ignore'):
            direction = np.where(rho > 0, w / (2.0 * half * np.where(rho > 0, rho, 1.0)), 0.0)
        return value, derivative * direction


@dataclass(frozen=True)
class Cover:
    """Finite cover of a neighbourhood of the closed unit disk"""

    sets: Tuple[CoverSet, ...]
    margin: float = 0.2

    @classmethod
    def standard(cls, inner: float = 0.95, outer_inner: float = 0.85, outer: float = 1.3,
                 margin: float = 0.2) -> "Cover":
        """Inner disk plus outer annulus overlapping in an annulus around |z| = 0.9"""
        return cls((CoverSet('disk', 0j, inner), CoverSet('annulus', 0j, outer, outer_inner)), margin)

    def __len__(self) -> int:
        return len(self.sets)

    def membership(self, z) -> np.ndarray:
        """Boolean array (len(sets), P)"""
        z = np.asarray(z, dtype=complex).reshape(-1)
        return np.array([s.contains(z) for s in self.sets])

    def check(self, spacing: float = 1.0 / 64) -> None:
        """
        Validate that the closed disk of radius 1 + margin is covered at most three deep.

        Raises:
            DbarError: If a sample point is uncovered or lies in more than 3 sets
        """
        radius = 1.0 + self.margin
        axis = np.arange(-radius, radius + spacing / 2, spacing)
        X, Y = np.meshgrid(axis, axis)
        z = (X + 1j * Y).reshape(-1)
        z = z[np.abs(z) <= radius]
        depth = self.membership(z).sum(axis=0)
        if np.any(depth == 0):
            raise DbarError(f"cover misses points of the closed disk of radius {radius:g}")
        if np.any(depth > 3):
            raise DbarError("a point lies in more than three cover sets")

    def overlap_pairs(self, spacing: float = 1.0 / 64) -> List[Tuple[int, int]]:
        radius = max(s.radius + abs(s.center) for s in self.sets)
        axis = np.arange(-radius, radius + spacing / 2, spacing)
        X, Y = np.meshgrid(axis, axis)
        member = self.membership((X + 1j * Y).reshape(-1))
        return [(a, b) for a in range(len(self.sets)) for b in range(a + 1, len(self.sets))
                if np.any(member[a] & member[b])]


@dataclass(frozen=True)
class PartitionOfUnity:
    """Normalized bumps rho_a = b_a / sum_b b_b subordinate to a cover"""

    cover: Cover

    def values(self, z) -> np.ndarray:
        return self.evaluate(z)[0]

    def dbar(self, z) -> np.ndarray:
        return self.evaluate(z)[1]

    def evaluate(self, z) -> Tuple[np.ndarray, np.ndarray]:
        """(rho, dbar rho), each of shape (len(sets), P); zero where no set covers z"""
        z = np.asarray(z, dtype=complex).reshape(-1)
        pairs = [s.bump(z) for s in self.cover.sets]
        b = np.array([p[0] for p in pairs])
        db = np.array([p[1] for p in pairs])
        total = b.sum(axis=0)
        dtotal = db.sum(axis=0)
        covered = total > 0
        safe = np.where(covered, total, 1.0)
        rho = np.where(covered, b / safe, 0.0)
        drho = np.where(covered, (db * safe - b * dtotal) / safe ** 2, 0.0)
        return rho, drho


@dataclass(frozen=True, eq=False)
class AdditiveCocycle:
    """Vector functions f_ab on U_a cap U_b with f_ab = -f_ba"""

    functions: Dict[Tuple[int, int], Callable[[np.ndarray], np.ndarray]]

    @classmethod
    def from_pairs(cls, pairs: Dict[Tuple[int, int], Callable[[np.ndarray], np.ndarray]]) -> "AdditiveCocycle":
        """Complete the given pairs antisymmetrically"""
        functions = dict(pairs)
        for (a, b), fn in pairs.items():
            if (b, a) not in functions:
                functions[(b, a)] = (lambda fn: lambda z: -np.asarray(fn(z), dtype=complex))(fn)
        return cls(functions)

    def value(self, a: int, b: int, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(-1)
        if a == b:
            sample = self._any_function()
            return np.zeros((z.shape[0], self.out_dim(sample)), dtype=complex)
        fn = self.functions.get((a, b))
        if fn is None:
            raise CocycleViolation(f"no cocycle component for the pair ({a}, {b})")
        return _as_columns(fn(z), z.shape[0])

    def _any_function(self):
        return next(iter(self.functions.values()))

    @staticmethod
    def out_dim(fn) -> int:
        sample = np.asarray(fn(np.array([0.9 + 0j])), dtype=complex)
        return 1 if sample.ndim == 1 else sample.shape[1]

    def check(self, cover: Cover, tolerance: float = DEFAULT_COUSIN_TOLERANCE,
              spacing: float = 1.0 / 64) -> float:
        """
        Max antisymmetry and triple-overlap defect on lattice samples.

        Raises:
            CocycleViolation: If either defect exceeds ``tolerance``
        """
        radius = 1.0 + cover.margin
        axis = np.arange(-radius, radius + spacing / 2, spacing)
        X, Y = np.meshgrid(axis, axis)
        z = (X + 1j * Y).reshape(-1)
        member = cover.membership(z)
        count = len(cover.sets)
        worst = 0.0
        for a in range(count):
            for b in range(a + 1, count):
                both = member[a] & member[b]
                if not np.any(both):
                    continue
                defect = self.value(a, b, z[both]) + self.value(b, a, z[both])
                worst = max(worst, float(np.max(np.linalg.norm(defect, axis=1))))
                for c in range(b + 1, count):
                    triple = both & member[c]
                    if not np.any(triple):
                        continue
                    zt = z[triple]
                    defect = self.value(a, b, zt) + self.value(b, c, zt) + self.value(c, a, zt)
                    worst = max(worst, float(np.max(np.linalg.norm(defect, axis=1))))
        if worst > tolerance:
            raise CocycleViolation(f"cocycle relation fails by {worst:.3e}")
        return worst


@dataclass(frozen=True, eq=False)
class CousinSolution:
    """
    Cochain c_a with c_a - c_b = f_ab, plus its certification numbers.

    ``constant`` is the a priori C in |c| <= C |f|, fixed by the cover and
    the method; ``ratio`` is the observed sup |c| / sup |f| for this input.
    """

    cochain: Dict[int, Callable[[np.ndarray], np.ndarray]]
    delta_residual: float
    cr_residuals: Dict[int, float]
    constant: float
    method: str
    ratio: float = 0.0
    lattice_values: Dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    def evaluate(self, alpha: int, z) -> np.ndarray:
        return self.cochain[alpha](np.asarray(z, dtype=complex).reshape(-1))


def _interpolator(domain: PlanarDomain, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    points = domain.lattice[0]
    xs, ys = points[0, :].real, points[:, 0].imag
    real = RegularGridInterpolator((ys, xs), values.real, bounds_error=False, fill_value=None)
    imag = RegularGridInterpolator((ys, xs), values.imag, bounds_error=False, fill_value=None)

    def evaluate(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex).reshape(-1)
        query = np.column_stack([z.imag, z.real])
        return real(query) + 1j * imag(query)

    return evaluate


def _solve_partition(cover: Cover, cocycle: AdditiveCocycle, spacing: Optional[float],
                     tolerance: float) -> CousinSolution:
    radius = 1.0 + cover.margin
    domain = PlanarDomain.disk(radius, spacing=spacing)
    points, _ = domain.lattice
    shape = points.shape
    z = points.reshape(-1)
    count = len(cover.sets)
    member = cover.membership(z)
    rho, drho = PartitionOfUnity(cover).evaluate(z)
    m = cocycle.out_dim(cocycle._any_function())

    # smooth splitting A_a = sum_b rho_b f_ab, and the global form dbar A_a
    smooth = {}
    form = np.zeros((z.shape[0], m), dtype=complex)
    assigned = np.zeros(z.shape[0], dtype=bool)
    for a in range(count):
        acc = np.zeros((z.shape[0], m), dtype=complex)
        sel = member[a] & ~assigned
        for b in range(count):
            if b == a:
                continue
            both = member[a] & member[b]
            if not np.any(both):
                continue
            fab = cocycle.value(a, b, z[both])
            acc[both] += rho[b][both, None] * fab
            here = both & sel
            if not np.any(here):
                continue
            form[here] += drho[b][here, None] * cocycle.value(a, b, z[here])
        assigned |= sel
        smooth[a] = acc

    u = cauchy_transform(form.reshape(shape + (m,)), domain).values.reshape(-1, m)

    lattice_values = {}
    cochain = {}
    for a in range(count):
        c = np.where(member[a][:, None], smooth[a] - u, 0.0)
        lattice_values[a] = c.reshape(shape + (m,))
        comps = [_interpolator(domain, lattice_values[a][:, :, j]) for j in range(m)]
        cochain[a] = (lambda comps: lambda q: np.column_stack([fn(q) for fn in comps]))(comps)

    delta = 0.0
    sup_f = 0.0
    for a in range(count):
        for b in range(a + 1, count):
            both = member[a] & member[b]
            if not np.any(both):
                continue
            fab = cocycle.value(a, b, z[both])
            gap = lattice_values[a].reshape(-1, m)[both] - lattice_values[b].reshape(-1, m)[both] - fab
            delta = max(delta, float(np.max(np.linalg.norm(gap, axis=1))))
            sup_f = max(sup_f, float(np.max(np.linalg.norm(fab, axis=1))))

    h = domain.spacing
    margin = BOUNDARY_MARGIN_CELLS * h
    cr = {}
    for a, s in enumerate(cover.sets):
        field_ = dbar_field(lattice_values[a], h)
        keep = (s.distance_to_boundary(points) >= margin) & domain.interior_mask(margin)
        keep[0, :] = keep[-1, :] = False
        keep[:, 0] = keep[:, -1] = False
        cr[a] = float(np.max(np.linalg.norm(field_[keep], axis=-1))) if np.any(keep) else 0.0

    form_sup = float(np.max(np.linalg.norm(form, axis=1)))
    bound = RESIDUAL_FACTOR * h * max(form_sup, sup_f)
    worst_cr = max(cr.values()) if cr else 0.0
    if worst_cr > bound and worst_cr > 1e-12:
        raise ResolutionTooCoarse(f"cochain CR residual {worst_cr:.3e} exceeds grid bound {bound:.3e}")

    shrunk = np.abs(z) <= 1.0
    sup_c = 0.0
    for a in range(count):
        keep = shrunk & member[a]
        if np.any(keep):
            sup_c = max(sup_c, float(np.max(np.linalg.norm(lattice_values[a].reshape(-1, m)[keep], axis=1))))
    # |A_a| <= |f| and |u| <= K sup_z sum_b |dbar rho_b| |f|
    constant = 1.0 + sup_constant(domain) * float(np.max(np.sum(np.abs(drho), axis=0)))
    ratio = sup_c / sup_f if sup_f > 0 else 0.0
    return CousinSolution(cochain, delta, cr, constant, 'partition', lattice_values, ratio)


def laurent_split_cover(cover: Cover) -> Tuple[int, int, float, float, float]:
    if len(cover.sets) != 2:
        raise DbarError("Laurent splitting needs a two-set cover")
    kinds = [s.kind for s in cover.sets]
    if sorted(kinds) != ['annulus', 'disk']:
        raise DbarError("Laurent splitting needs an inner disk and an outer annulus")
    inner = kinds.index('disk')
    outer = 1 - inner
    disk, ring = cover.sets[inner], cover.sets[outer]
    if disk.center != ring.center or not ring.inner_radius < disk.radius < ring.radius:
        raise DbarError("disk and annulus must be concentric with an annular overlap")
    lo, hi = ring.inner_radius, disk.radius
    return inner, outer, lo, hi, 0.5 * (lo + hi)


def _solve_laurent(cover: Cover, cocycle: AdditiveCocycle, tolerance: float) -> CousinSolution:
    inner, outer, lo, hi, mid = laurent_split_cover(cover)
    center = cover.sets[inner].center
    rate = max(mid / hi, lo / mid)
    nodes = next_power_of_two(2.0 * math.log(tolerance * 1e-4) / math.log(rate), 256, 1 << 14)

    def f(zeta: np.ndarray) -> np.ndarray:
        return cocycle.value(inner, outer, zeta + center)

    laurent = circle_coefficients(f, None, CircleSampler(mid, nodes)).trimmed(mid)
    positive, negative = laurent.positive_part(), laurent.negative_part()

    def c_inner(z: np.ndarray) -> np.ndarray:
        return positive.evaluate(np.asarray(z, dtype=complex).reshape(-1) - center)

    def c_outer(z: np.ndarray) -> np.ndarray:
        return -negative.evaluate(np.asarray(z, dtype=complex).reshape(-1) - center)

    cochain = {inner: c_inner, outer: c_outer}
    theta = np.exp(2j * np.pi * np.arange(128) / 128)
    delta, sup_f = 0.0, 0.0
    for radius in (lo + 0.25 * (hi - lo), mid, lo + 0.75 * (hi - lo)):
        zs = center + radius * theta
        fab = cocycle.value(inner, outer, zs)
        gap = c_inner(zs) - c_outer(zs) - fab
        delta = max(delta, float(np.max(np.linalg.norm(gap, axis=1))))
        sup_f = max(sup_f, float(np.max(np.linalg.norm(fab, axis=1))))

    cr = {}
    for alpha, anchor in ((inner, center + 0.5 * lo), (outer, center + mid)):
        samples = sample_grid(cochain[alpha], anchor, 1e-3, 8)
        cr[alpha] = cr_residual(samples, 1e-3)

    on_mid = center + mid * theta
    on_one = center + theta
    sup_c = max(float(np.max(np.linalg.norm(c_inner(on_mid), axis=1))),
                float(np.max(np.linalg.norm(c_outer(on_mid), axis=1))),
                float(np.max(np.linalg.norm(c_outer(on_one), axis=1))))
    # Cauchy estimates on the quarter circles: sum (mid / s_hi)^k and sum (s_lo / mid)^k
    s_lo, s_hi = lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo)
    constant = max(s_hi / (s_hi - mid), s_lo / (mid - s_lo))
    ratio = sup_c / sup_f if sup_f > 0 else 0.0
    return CousinSolution(cochain, delta, cr, constant, 'laurent', ratio=ratio)


def solve_cousin(cover: Cover, cocycle: AdditiveCocycle, method: str = 'partition',
                 spacing: Optional[float] = None,
                 tolerance: float = DEFAULT_COUSIN_TOLERANCE) -> CousinSolution:
    """
    Solve the additive Cousin problem c_a - c_b = f_ab with a sup-norm estimate.

    ``method='partition'`` follows the smooth-splitting construction:
    A_a = sum_b rho_b f_ab, the global form dbar A_a, u its Cauchy
    transform, c_a = A_a - u. ``method='laurent'`` splits a two-chart
    cocycle into its Laurent parts on the overlap circle, which is exact
    for the Laurent polynomials met in normalization.

    Raises:
        CocycleViolation: If the input is not a cocycle within tolerance
        ResolutionTooCoarse: If the partition route's residuals exceed grid bounds
    """
    cocycle.check(cover, tolerance)
    if method == 'partition':
        cover.check()
        solution = _solve_partition(cover, cocycle, spacing, tolerance)
    elif method == 'laurent':
        solution = _solve_laurent(cover, cocycle, tolerance)
    else:
        raise DbarError(f"unknown Cousin method {method!r}")
    logger.debug(f"cousin ({method}): delta={solution.delta_residual:.3e} C={solution.constant:.4g} "
                 f"ratio={solution.ratio:.4g}")
    return solution
