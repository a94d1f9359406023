"""
Hartogs Kit - numerical Hartogs-type continuation.

Extension from Hartogs figures in finite and truncated infinite dimension,
dbar and Cousin solvers, normalization of disk neighborhoods, the
continuity principle along disk families, and holomorphic loop families.
"""

__version__ = "1.0.0"

from .errors import HartogsKitError, ConfigError
from .hartogs import HartogsFigure, ExtensionSettings, extend_bidim
from .dbar import Cover, AdditiveCocycle, solve_cousin
from .royden import ChartAtlas, normalize_transitions, assemble_tubular_map
from .continuation import DiskFamily, continue_along
from .loopspace import LoopFamily, extend_loop_family
from .config import RunConfig, load_config
from .runner import run

__all__ = [
    "HartogsKitError",
    "ConfigError",
    "HartogsFigure",
    "ExtensionSettings",
    "extend_bidim",
    "Cover",
    "AdditiveCocycle",
    "solve_cousin",
    "ChartAtlas",
    "normalize_transitions",
    "assemble_tubular_map",
    "DiskFamily",
    "continue_along",
    "LoopFamily",
    "extend_loop_family",
    "RunConfig",
    "load_config",
    "run",
]
