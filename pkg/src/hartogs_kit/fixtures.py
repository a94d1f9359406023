"""
Named fixtures for the command-line subcommands.

Each subcommand has a small registry of fixture ids. A fixture is built
from the run configuration and carries its inputs together with a closed
form when one is known, so runs can report an absolute error.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from .config import RunConfig
from .continuation import DiskFamily, Region
from .dbar import AdditiveCocycle, Cover, PlanarDomain
from .errors import ConfigError
from .hartogs import HartogsFigure
from .jets import JetMap, jet_space
from .loopspace import LoopFamily, SobolevLoop
from .royden import ChartAtlas
from .utils import slugify_name

logger = logging.getLogger(__name__)

HolomorphicFunction = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ExtendFixture:
    f: HolomorphicFunction
    figure: HartogsFigure
    closed_form: Optional[HolomorphicFunction] = None


@dataclass(frozen=True, eq=False)
class DbarFixture:
    domain: PlanarDomain
    g: HolomorphicFunction
    solution: Optional[HolomorphicFunction] = None


@dataclass(frozen=True, eq=False)
class CousinFixture:
    cover: Cover
    cocycle: AdditiveCocycle


@dataclass(frozen=True, eq=False)
class NormalizeFixture:
    atlas: ChartAtlas
    expected: Optional[Tuple[JetMap, JetMap]] = None


@dataclass(frozen=True, eq=False)
class ContinueFixture:
    f: HolomorphicFunction
    family: DiskFamily
    region: Region
    closed_form: Optional[HolomorphicFunction] = None


@dataclass(frozen=True, eq=False)
class LoopspaceFixture:
    family: LoopFamily
    closed_forms: Dict[int, HolomorphicFunction]
    base_loop: Optional[SobolevLoop] = None
    fibre_loop: Optional[SobolevLoop] = None


def figure_from_config(config: RunConfig) -> HartogsFigure:
    return HartogsFigure(config.q, config.n, config.r, config.model, config.M)


# --- extend ------------------------------------------------------------------

def _inverse_z2(config: RunConfig) -> ExtendFixture:
    def f(Z: np.ndarray) -> np.ndarray:
        return 1.0 / (2.0 - Z[:, 1])
    return ExtendFixture(f, figure_from_config(config), f)


def _polynomial(config: RunConfig) -> ExtendFixture:
    def f(Z: np.ndarray) -> np.ndarray:
        return Z[:, 0] * Z[:, -1] ** 2 + 3.0 * Z[:, -1] - 0.5j
    return ExtendFixture(f, figure_from_config(config), f)


def _exponential(config: RunConfig) -> ExtendFixture:
    def f(Z: np.ndarray) -> np.ndarray:
        return np.exp(0.5 * np.sum(Z, axis=1))
    return ExtendFixture(f, figure_from_config(config), f)


def _vector(config: RunConfig) -> ExtendFixture:
    def f(Z: np.ndarray) -> np.ndarray:
        return np.stack([1.0 / (2.0 - Z[:, -1]), Z[:, 0] * Z[:, -1]], axis=1)
    return ExtendFixture(f, figure_from_config(config), f)


# --- dbar --------------------------------------------------------------------

def _constant_disk(config: RunConfig) -> DbarFixture:
    # The Cauchy transform of 1 over the unit disk is conj(z)
    return DbarFixture(PlanarDomain.disk(1.0, spacing=config.spacing),
                       lambda z: np.ones_like(z), np.conj)


def _linear_annulus(config: RunConfig) -> DbarFixture:
    return DbarFixture(PlanarDomain.annulus(0.5, 1.0, spacing=config.spacing), lambda z: z)


def _gaussian_rectangle(config: RunConfig) -> DbarFixture:
    return DbarFixture(PlanarDomain.rectangle(2.0, 1.0, spacing=config.spacing),
                       lambda z: np.exp(-np.abs(z) ** 2))


# --- cousin ------------------------------------------------------------------

def _laurent_inverse(config: RunConfig) -> CousinFixture:
    return CousinFixture(Cover.standard(), AdditiveCocycle.from_pairs({(0, 1): lambda z: 1.0 / z}))


def _mixed(config: RunConfig) -> CousinFixture:
    def f01(z: np.ndarray) -> np.ndarray:
        return np.stack([np.exp(z) + 0.1 / z, z ** 2 - 0.25 / z ** 2], axis=1)
    return CousinFixture(Cover.standard(), AdditiveCocycle.from_pairs({(0, 1): f01}))


# --- normalize ---------------------------------------------------------------

def round_trip_changes(degree: int = 8, band: int = 32) -> Tuple[JetMap, JetMap]:
    """
    Chart changes g_0 = (z, w1 + w1^2 / 2, w2) and
    g_1 = (z + w2^2 / (20 z), w1, w2 + e w1 w2 / z) on C x C^2.
    """
    space = jet_space(2, degree, band)
    g0 = JetMap.from_terms(space, {(1, (2, 0), 0): 0.5})
    g1 = JetMap.from_terms(space, {(0, (0, 2), -1): 0.05, (2, (1, 1), -1): np.e})
    return g0, g1


def _identity_atlas(config: RunConfig) -> NormalizeFixture:
    fibre_dim = config.n if config.n is not None else config.M
    return NormalizeFixture(ChartAtlas.identity(fibre_dim, config.degree, config.band))


def _round_trip(config: RunConfig) -> NormalizeFixture:
    changes = round_trip_changes(config.degree, config.band)
    expected = (changes[0].inverse(), changes[1].inverse())
    return NormalizeFixture(ChartAtlas.conjugated(changes), expected)


def _parabola_graph(config: RunConfig) -> NormalizeFixture:
    graph = np.array([[0.0, 0.0], [0.0, 0.5], [0.3, 0.0]], dtype=complex)
    return NormalizeFixture(ChartAtlas.from_graph(graph, config.degree, config.band))


# --- continue ----------------------------------------------------------------

def _translated_disks(config: RunConfig) -> ContinueFixture:
    def phi(t: float, lam: np.ndarray) -> np.ndarray:
        return np.stack([lam, np.full_like(lam, 0.3 * t)], axis=1)

    def f(X: np.ndarray) -> np.ndarray:
        return 1.0 / (X[:, 1] - 2.0)

    family = DiskFamily(phi, 2, np.linspace(0.0, 1.0, config.grid))
    return ContinueFixture(f, family, Region.everywhere(), f)


def _approaching_pole(config: RunConfig) -> ContinueFixture:
    def phi(t: float, lam: np.ndarray) -> np.ndarray:
        return np.stack([lam, np.full_like(lam, 0.5 * t)], axis=1)

    def f(X: np.ndarray) -> np.ndarray:
        return 1.0 / (X[:, 0] + 2.0 * X[:, 1] - 2.2)

    family = DiskFamily(phi, 2, np.linspace(0.0, 1.0, config.grid))
    return ContinueFixture(f, family, Region.everywhere(), f)


# --- loopspace ---------------------------------------------------------------

def _loop_figure(config: RunConfig) -> HartogsFigure:
    return HartogsFigure(config.q, 1 if config.n is None else config.n, config.r, config.model, config.M)


def _two_mode_modes() -> Dict[int, HolomorphicFunction]:
    return {1: lambda Z: 1.0 / (2.0 - Z[:, -1]), -1: lambda Z: Z[:, 0]}


def _two_mode(config: RunConfig) -> LoopspaceFixture:
    modes = _two_mode_modes()
    return LoopspaceFixture(LoopFamily(modes, 1, _loop_figure(config), config.k), modes)


def _mobius_two_mode(config: RunConfig) -> LoopspaceFixture:
    modes = _two_mode_modes()
    base = SobolevLoop.from_modes({0: [0.2], 1: [0.3]}, 1, config.k)
    fibre = SobolevLoop.from_modes({-1: [0.25j], 2: [0.4]}, 1, config.k)
    return LoopspaceFixture(LoopFamily(modes, 1, _loop_figure(config), config.k), modes, base, fibre)


FIXTURES: Dict[str, Dict[str, Callable[[RunConfig], object]]] = {
    'extend': {
        'inverse_z2': _inverse_z2,
        'polynomial': _polynomial,
        'exponential': _exponential,
        'vector': _vector,
    },
    'dbar': {
        'constant_disk': _constant_disk,
        'linear_annulus': _linear_annulus,
        'gaussian_rectangle': _gaussian_rectangle,
    },
    'cousin': {
        'laurent_inverse': _laurent_inverse,
        'mixed': _mixed,
    },
    'normalize': {
        'identity': _identity_atlas,
        'round_trip': _round_trip,
        'parabola_graph': _parabola_graph,
    },
    'continue': {
        'translated_disks': _translated_disks,
        'approaching_pole': _approaching_pole,
    },
    'loopspace': {
        'two_mode': _two_mode,
        'mobius_two_mode': _mobius_two_mode,
    },
}


def build_fixture(config: RunConfig):
    """
    Build the fixture named by the configuration

    Raises:
        ConfigError: If the fixture id is unknown for the subcommand
    """
    registry = FIXTURES[config.subcommand]
    key = slugify_name(config.fixture).replace('-', '_')
    if key not in registry:
        raise ConfigError(f"unknown {config.subcommand} fixture {config.fixture!r}; "
                          f"known: {', '.join(sorted(registry))}")
    logger.debug(f"building {config.subcommand} fixture {key}")
    return registry[key](config)
