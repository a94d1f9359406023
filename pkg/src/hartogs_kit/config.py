"""
Run configuration.

Config files are flat ``key = value`` text. A ``[run]`` header is optional.
Values resolve in the order config file, then environment, then command line.
"""

import configparser
import logging
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional, Union

from .errors import ConfigError
from .series import DEFAULT_SEED, DEFAULT_TRUNCATION

logger = logging.getLogger(__name__)

SECTION = 'run'
SUBCOMMANDS = ('extend', 'dbar', 'cousin', 'normalize', 'continue', 'loopspace')
MIN_NODES = 16
MAX_NODES = 4096
MAX_GRID = 1024
MAX_TRUNCATION = 64
MAX_MODES = 512


@dataclass(frozen=True)
class RunConfig:
    """Typed, validated parameters of one run"""

    subcommand: str
    fixture: str
    out_dir: str = 'results'
    q: int = 1
    n: Optional[int] = 1
    r: float = 0.2
    model: str = 'polydisk'
    M: int = DEFAULT_TRUNCATION
    modes: int = 32
    k: int = 1
    nodes: Optional[int] = None
    grid: int = 5
    tolerance: float = 1e-9
    seed: int = DEFAULT_SEED
    threads: int = 1
    degree: int = 8
    band: int = 32
    method: str = 'partition'
    spacing: Optional[float] = None
    step: float = 0.25
    rho: float = 0.5
    log_level: str = 'INFO'

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}; expected one of {', '.join(SUBCOMMANDS)}")
        if not self.fixture:
            raise ConfigError("no fixture given")
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")
        if not 0.0 < self.r < 1.0:
            raise ConfigError(f"r must lie in (0, 1), got {self.r}")
        if self.nodes is not None and (not MIN_NODES <= self.nodes <= MAX_NODES or self.nodes & (self.nodes - 1)):
            raise ConfigError(f"nodes must be a power of two in [{MIN_NODES}, {MAX_NODES}], got {self.nodes}")
        if not 2 <= self.grid <= MAX_GRID:
            raise ConfigError(f"grid must lie in [2, {MAX_GRID}], got {self.grid}")
        if not 1 <= self.M <= MAX_TRUNCATION:
            raise ConfigError(f"M must lie in [1, {MAX_TRUNCATION}], got {self.M}")
        if not 1 <= self.modes <= MAX_MODES:
            raise ConfigError(f"modes must lie in [1, {MAX_MODES}], got {self.modes}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.q < 1:
            raise ConfigError(f"q must be >= 1, got {self.q}")
        if self.n is not None and self.n < 1:
            raise ConfigError(f"n must be >= 1 or inf, got {self.n}")
        if self.model not in ('ball', 'polydisk'):
            raise ConfigError(f"model must be 'ball' or 'polydisk', got {self.model!r}")
        if self.method not in ('partition', 'laurent'):
            raise ConfigError(f"method must be 'partition' or 'laurent', got {self.method!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.degree < 1 or self.band < 1:
            raise ConfigError(f"degree and band must be >= 1, got {self.degree} and {self.band}")
        if self.spacing is not None and not self.spacing > 0:
            raise ConfigError(f"spacing must be positive, got {self.spacing}")
        if not self.step > 0 or not 0.0 < self.rho <= 1.0:
            raise ConfigError(f"step must be positive and rho in (0, 1], got {self.step} and {self.rho}")
        if self.log_level.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR'):
            raise ConfigError(f"unknown log level {self.log_level!r}")

    def describe(self) -> Dict[str, object]:
        data = {f.name: getattr(self, f.name) for f in fields(self) if f.name != 'out_dir'}
        if data['n'] is None:
            data['n'] = 'inf'
        return data


def _optional_int(text: str) -> Optional[int]:
    return None if text.strip().lower() in ('inf', 'infinity', 'none', 'auto') else int(text)


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ('', 'none', 'auto') else float(text)


_PARSERS = {
    'q': int, 'n': _optional_int, 'r': float, 'M': int, 'modes': int, 'k': int,
    'nodes': _optional_int, 'grid': int, 'tolerance': float, 'seed': int, 'threads': int,
    'degree': int, 'band': int, 'spacing': _optional_float, 'step': float, 'rho': float,
}
_KEYS = {f.name.lower(): f.name for f in fields(RunConfig)}


def read_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read raw key/value pairs from a config file

    Raises:
        ConfigError: If the file is missing, malformed or has unknown keys
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e

    parser = configparser.ConfigParser(interpolation=None)
    try:
        try:
            parser.read_string(text, source=str(path))
        except configparser.MissingSectionHeaderError:
            parser = configparser.ConfigParser(interpolation=None)
            parser.read_string(f"[{SECTION}]\n{text}", source=str(path))
    except configparser.Error as e:
        raise ConfigError(f"malformed config {path}: {e}") from e

    if parser.sections() != [SECTION]:
        raise ConfigError(f"config {path} must hold a single [{SECTION}] section, got {parser.sections()}")
    raw = {}
    for key, value in parser.items(SECTION):
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        raw[_KEYS[key]] = value.strip()
    return raw


def environment_overrides() -> Dict[str, str]:
    """HARTOGSKIT_THREADS and HARTOGSKIT_LOG_LEVEL, when set"""
    overrides = {}
    threads = os.getenv('HARTOGSKIT_THREADS')
    if threads:
        overrides['threads'] = threads
    level = os.getenv('HARTOGSKIT_LOG_LEVEL')
    if level:
        overrides['log_level'] = level
    return overrides


def build_config(raw: Dict[str, object]) -> RunConfig:
    """
    Type raw values into a RunConfig

    Raises:
        ConfigError: If a value does not parse or fails validation
    """
    values = {}
    for key, value in raw.items():
        if key not in _KEYS.values():
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(value, str) and key in _PARSERS:
            try:
                value = _PARSERS[key](value)
            except ValueError as e:
                raise ConfigError(f"bad value for {key}: {value!r}") from e
        values[key] = value
    if 'subcommand' not in values or 'fixture' not in values:
        raise ConfigError("config needs both a subcommand and a fixture")
    return RunConfig(**values)


def load_config(path: Optional[Union[str, Path]] = None,
                overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    """
    Load a run configuration

    Args:
        path: Optional config file
        overrides: Command-line values; ``None`` entries are ignored

    Returns:
        Validated RunConfig
    """
    raw: Dict[str, object] = read_config_file(path) if path else {}
    raw.update(environment_overrides())
    raw.update({key: value for key, value in (overrides or {}).items() if value is not None})
    config = build_config(raw)
    logger.debug(f"config: {config.describe()}")
    return config


