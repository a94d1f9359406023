"""
Analytic continuation along a continuous family of analytic disks.

A family t -> phi_t of disks in C^(1+M) is swept from t = 0 to t = 1. At each
step the graph disk lambda -> (lambda, phi_t(lambda)) gets tubular
coordinates (lambda, w) from the normalization module; in the coordinates
of the next disk the known map is given on a Hartogs figure: near the
boundary circle by f itself, which the family keeps inside the region U,
and near the disk by the previous function element. Extending from that
figure produces the next element.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import BoundaryEscape, ContinuationError, HartogsKitError, OverlapMismatch, StepCollapse
from .hartogs import ExtensionResult, ExtensionSettings, HartogsFigure, extend_bidim
from .jets import DEFAULT_BAND
from .quadrature import CircleSampler, circle_coefficients, cr_residual, sample_grid
from .royden import ChartAtlas, TubularMap, assemble_tubular_map, normalize_transitions
from .series import DEFAULT_SEED, sphere_samples

logger = logging.getLogger(__name__)

HolomorphicFunction = Callable[[np.ndarray], np.ndarray]

DEFAULT_R = 0.2
DEFAULT_RHO = 0.5
DEFAULT_STEP = 0.25
DEFAULT_MIN_STEP = 1e-3
DEFAULT_OVERLAP_SAMPLES = 50
DEFAULT_OVERLAP_TOLERANCE = 1e-7
JET_DEGREE = 2
BOUNDARY_NODES = 256
CHECK_RADIUS = 0.9

TRACE_HEADER = ['t', 'step', 'psi_norm', 'overlap_residual', 'sup_bound', 'check_sup',
                'center_re', 'center_im']


@dataclass(frozen=True, eq=False)
class Region:
    """Open set U given by a margin function, positive exactly inside U"""

    margin: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def everywhere(cls) -> "Region":
        return cls(lambda X: np.full(np.atleast_2d(X).shape[0], np.inf))

    @classmethod
    def ball(cls, radius: float, center=None) -> "Region":
        def margin(X: np.ndarray) -> np.ndarray:
            X = np.atleast_2d(X)
            c = np.zeros(X.shape[1]) if center is None else np.asarray(center)
            return radius - np.linalg.norm(X - c, axis=1)
        return cls(margin)

    def contains(self, X) -> np.ndarray:
        return np.asarray(self.margin(np.atleast_2d(X))) > 0


@dataclass(frozen=True, eq=False)
class RegionFunction:
    """f restricted to U; queries outside U are an error, not an extrapolation"""

    f: HolomorphicFunction
    region: Region

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        margins = np.asarray(self.region.margin(X))
        if np.any(margins <= 0):
            worst = X[int(np.argmin(margins))]
            raise BoundaryEscape(f"f queried outside its region at {np.round(worst, 6).tolist()}")
        return self.f(X)


def prolong_cylinder(f: HolomorphicFunction) -> HolomorphicFunction:
    """F(lambda, x) = f(x): the prolongation of f that ignores the first coordinate"""
    def prolonged(Y: np.ndarray) -> np.ndarray:
        return f(np.atleast_2d(Y)[:, 1:])
    return prolonged


@dataclass(frozen=True, eq=False)
class DiskFamily:
    """
    phi(t, lam) -> points (P, ambient_dim) for lam of shape (P,), holomorphic in lam
    on a neighbourhood of the closed unit disk and continuous in t.
    """

    phi: Callable[[float, np.ndarray], np.ndarray]
    ambient_dim: int
    grid: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 1.0, 5))
    band: int = DEFAULT_BAND

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.shape[0] < 2 or np.any(np.diff(grid) <= 0):
            raise ContinuationError("the t grid needs at least two increasing points")
        object.__setattr__(self, 'grid', grid)

    def at(self, t: float, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex).reshape(-1)
        return np.asarray(self.phi(t, lam), dtype=complex).reshape(lam.shape[0], self.ambient_dim)

    def taylor(self, t: float) -> Tuple[np.ndarray, float]:
        """Taylor coefficients (band + 1, ambient_dim) of phi_t and the mass outside them"""
        nodes = 1 << (4 * self.band - 1).bit_length()
        laurent = circle_coefficients(lambda lam: self.at(t, lam), None, CircleSampler(1.0, nodes))
        coeffs = np.stack([laurent.coefficient(k) for k in range(self.band + 1)])
        outside = laurent.max_abs(laurent.k_min, -1) + laurent.max_abs(self.band + 1, laurent.k_max)
        return coeffs, outside + laurent.discarded_bound

    def boundary_sup(self, t1: float, t2: float) -> float:
        """sup over |lam| = 1 of |phi_t2 - phi_t1|, which bounds it on the disk"""
        lam = np.exp(2j * np.pi * np.arange(BOUNDARY_NODES) / BOUNDARY_NODES)
        return float(np.max(np.linalg.norm(self.at(t2, lam) - self.at(t1, lam), axis=1)))


@dataclass(frozen=True)
class StepControl:
    r: float = DEFAULT_R
    rho: float = DEFAULT_RHO
    initial_step: float = DEFAULT_STEP
    min_step: float = DEFAULT_MIN_STEP
    tolerance: float = 1e-9
    overlap_samples: int = DEFAULT_OVERLAP_SAMPLES
    overlap_tolerance: float = DEFAULT_OVERLAP_TOLERANCE
    frame: Optional[np.ndarray] = None
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if not 0.0 < self.r < 1.0:
            raise ContinuationError(f"r must lie in (0, 1), got {self.r}")
        if not self.rho > 0:
            raise ContinuationError(f"tube radius must be positive, got {self.rho}")
        if not 0.0 < self.min_step <= self.initial_step:
            raise ContinuationError("need 0 < min_step <= initial_step")


@dataclass(frozen=True)
class FamilyReport:
    interior_margin: float
    boundary_margin: float
    modulus: float
    cr_residual: float

    @property
    def ok(self) -> bool:
        return self.interior_margin > 0 and self.boundary_margin > 0


def check_family(family: DiskFamily, region: Region, radial: int = 16,
                 angular: int = 64) -> FamilyReport:
    """
    Sample the hypotheses of the continuity principle on the family's grid.

    Condition i is the disk at t = 0 inside U, condition ii every boundary
    circle inside U. The modulus is the largest sup |phi_t - phi_t'| / |t - t'|
    over consecutive grid points. Nothing is raised; the caller decides.
    """
    theta = np.exp(2j * np.pi * np.arange(angular) / angular)
    radii = np.linspace(0.0, 1.0, radial)
    disk = (radii[:, None] * theta[None, :]).reshape(-1)
    interior = float(np.min(region.margin(family.at(family.grid[0], disk))))
    boundary = min(float(np.min(region.margin(family.at(t, theta)))) for t in family.grid)

    modulus = 0.0
    for t1, t2 in zip(family.grid[:-1], family.grid[1:]):
        modulus = max(modulus, family.boundary_sup(t1, t2) / abs(t2 - t1))

    cr = 0.0
    for t in family.grid:
        for anchor in (0.0, 0.5):
            samples = sample_grid(lambda lam: family.at(t, lam), anchor, 1e-3, 8)
            cr = max(cr, cr_residual(samples, 1e-3))
    report = FamilyReport(interior, boundary, modulus, cr)
    logger.debug(f"family check: {report}")
    return report


def tubular_coordinates(family: DiskFamily, t: float, control: StepControl) -> TubularMap:
    """Tubular map (lambda, w) -> (lambda, phi_t(lambda) + frame w) of the graph disk"""
    graph, outside = family.taylor(t)
    if outside > control.tolerance:
        logger.warning(f"phi_{t:.4g} has mass {outside:.2e} outside its Taylor band")
    atlas = ChartAtlas.from_graph(graph, degree=JET_DEGREE, band=family.band, frame=control.frame)
    return assemble_tubular_map(normalize_transitions(atlas))


@dataclass(frozen=True, eq=False)
class FunctionElement:
    """
    The continued map near phi_t(D): f_t(x) = E(lambda, w / rho) where
    (lambda, w) are the tubular coordinates of (lambda, x).
    """

    t: float
    extension: ExtensionResult
    tube: TubularMap
    rho: float

    def coordinates(self, X, lam=0.0) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        lam = np.broadcast_to(np.asarray(lam, dtype=complex), (X.shape[0],))
        chart = self.tube.invert(np.hstack([lam[:, None], X]))
        chart[:, 1:] /= self.rho
        return chart

    def evaluate(self, X, lam=0.0) -> np.ndarray:
        """Values at ambient points X (P, 1 + M) seen from the disk point lam"""
        return self.extension.evaluate(self.coordinates(X, lam))


def _figure_function(f: RegionFunction, tube: TubularMap, control: StepControl,
                     previous: Optional[FunctionElement]) -> HolomorphicFunction:
    prolonged = prolong_cylinder(f)
    shell_radius = 1.0 - control.r

    def G(Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(Y)
        chart = Y.copy()
        chart[:, 1:] *= control.rho
        X = tube.evaluate(chart)
        if previous is None:
            return prolonged(X)
        shell = np.abs(Y[:, 0]) > shell_radius
        parts = []
        if np.any(shell):
            parts.append((shell, np.asarray(prolonged(X[shell]), dtype=complex)))
        if not np.all(shell):
            core = ~shell
            parts.append((core, np.asarray(previous.evaluate(X[core, 1:], Y[core, 0]), dtype=complex)))
        out = np.zeros((Y.shape[0],) + parts[0][1].shape[1:], dtype=complex)
        for mask, values in parts:
            out[mask] = values
        return out

    return G


def _check_points(figure: HartogsFigure) -> np.ndarray:
    F = figure.fibre_dim
    eye = np.eye(F)
    fibre = np.vstack([CHECK_RADIUS * eye, -CHECK_RADIUS * eye])
    return np.hstack([np.zeros((fibre.shape[0], 1)), fibre])


def _overlap_residual(new: FunctionElement, old: FunctionElement, family: DiskFamily,
                      control: StepControl, rng: np.random.Generator) -> float:
    count = control.overlap_samples
    F = family.ambient_dim
    lam = 0.5 * np.sqrt(rng.uniform(size=count)) * np.exp(2j * np.pi * rng.uniform(size=count))
    directions = sphere_samples(count, F, seed=int(rng.integers(1 << 30)))
    size = rng.uniform(control.r, 0.5, size=(count, 1))
    chart = np.hstack([lam[:, None], control.rho * size * directions])
    X = new.tube.evaluate(chart)[:, 1:]
    a, b = new.evaluate(X, lam), old.evaluate(X, lam)
    scale = max(1.0, new.extension.sup_bound)
    return float(np.max(np.abs(a - b))) / scale


@dataclass(frozen=True, eq=False)
class ContinuationResult:
    elements: Tuple[FunctionElement, ...]
    trace: Tuple[Tuple[float, ...], ...]
    report: FamilyReport

    @property
    def final(self) -> FunctionElement:
        return self.elements[-1]

    def value(self, X, lam=0.0) -> np.ndarray:
        return self.final.evaluate(X, lam)


def continue_along(f: HolomorphicFunction, family: DiskFamily,
                   control: Optional[StepControl] = None,
                   region: Optional[Region] = None,
                   settings: Optional[ExtensionSettings] = None) -> ContinuationResult:
    """
    Continue f from a neighbourhood of phi_0(D) along the family up to t = 1.

    Steps end on the family grid or earlier: a step t1 -> t2 is accepted when
    sup |phi_t2 - phi_t1| / rho < r / 4, otherwise it is halved.

    Raises:
        BoundaryEscape: If condition i or ii fails, or f is queried outside U
        StepCollapse: If the accepted step falls below ``min_step``
        ExtensionError: From the Hartogs extension, tagged with the offending t
    """
    control = control or StepControl()
    region = region or Region.everywhere()
    settings = settings or ExtensionSettings(tolerance=control.tolerance, seed=control.seed,
                                             max_induction_depth=max(4, family.ambient_dim))
    report = check_family(family, region)
    if report.interior_margin <= 0:
        raise BoundaryEscape(f"phi_0(D) leaves the region (margin {report.interior_margin:.3e})")
    if report.boundary_margin <= 0:
        raise BoundaryEscape(f"a boundary circle leaves the region (margin {report.boundary_margin:.3e})")

    restricted = RegionFunction(f, region)
    figure = HartogsFigure(q=1, n=family.ambient_dim, r=control.r, model='ball')
    rng = np.random.default_rng(control.seed)
    checks = _check_points(figure)

    elements: List[FunctionElement] = []
    trace: List[Tuple[float, ...]] = []
    t, step = float(family.grid[0]), control.initial_step
    targets = [float(g) for g in family.grid[1:]]
    previous: Optional[FunctionElement] = None
    psi_norm = 0.0
    while True:
        try:
            tube = tubular_coordinates(family, t, control)
            G = _figure_function(restricted, tube, control, previous)
            extension = extend_bidim(G, figure, settings=settings)
            element = FunctionElement(t, extension, tube, control.rho)
            overlap = 0.0
            if previous is not None:
                overlap = _overlap_residual(element, previous, family, control, rng)
                if overlap > control.overlap_tolerance:
                    raise OverlapMismatch(f"consecutive elements differ by {overlap:.3e}")
            check_sup = float(np.max(np.abs(extension.evaluate(checks))))
        except HartogsKitError as e:
            raise type(e)(f"at t={t:.6g}: {e}") from e

        center = complex(np.asarray(element.evaluate(family.at(t, [0.0]), 0.0)).reshape(-1)[0])
        trace.append((t, step if previous is not None else 0.0, psi_norm, overlap,
                      extension.sup_bound, check_sup, center.real, center.imag))
        elements.append(element)
        logger.info(f"t={t:.4f}: element built, overlap {overlap:.2e}, center value {center:.10g}")
        previous = element
        if t >= targets[-1]:
            break

        while targets and targets[0] <= t:
            targets.pop(0)
        step = min(2.0 * step, control.initial_step)
        while True:
            t_next = min(t + step, targets[0])
            psi_norm = family.boundary_sup(t, t_next)
            if psi_norm / control.rho < control.r / 4.0:
                break
            step = 0.5 * (t_next - t)
            if step < control.min_step:
                raise StepCollapse(f"at t={t:.6g}: step fell below {control.min_step:g} "
                                   f"(|psi| = {psi_norm:.3e})")
        step = t_next - t
        t = t_next

    return ContinuationResult(tuple(elements), tuple(trace), report)
