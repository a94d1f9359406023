"""
Utility functions for hartogs_kit.

Includes:
- format_real / format_complex: 17-significant-digit rendering for artifacts
- slugify_name: Convert fixture ids and trace titles to file-safe slugs
- parallel_map: Order-preserving map capped by the run's thread cap
"""

import math
import re
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def format_real(value: float) -> str:
    """
    Render a real number with 17 significant digits.

    Infinities and NaN are written as ``inf``, ``-inf`` and ``nan`` so that
    summary files stay parseable by ``float()``.

    Examples:
        >>> format_real(0.1)
        "0.10000000000000001"
        >>> format_real(float("inf"))
        "inf"
    """
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.17g}"


def format_complex(value: complex) -> List[str]:
    """Render a complex number as a [re, im] pair of 17-digit strings"""
    value = complex(value)
    return [format_real(value.real), format_real(value.imag)]


def slugify_name(text: str) -> str:
    """
    Convert a fixture id or trace title to a file-safe slug.

    - Normalize diacritics to ASCII
    - Lowercase
    - Replace spaces and dots with underscores
    - Remove anything that is not alphanumeric, underscore or hyphen
    - Strip leading/trailing separators

    Examples:
        >>> slugify_name("Geometric z2")
        "geometric_z2"
        >>> slugify_name("  norm table  ")
        "norm_table"
    """
    if not text or not text.strip():
        return ""

    slug = unicodedata.normalize('NFKD', text).encode('ascii', 'ignore').decode('ascii')
    slug = slug.strip().lower()
    slug = re.sub(r'[\s.]+', '_', slug)
    slug = re.sub(r'[^a-z0-9_\-]', '', slug)
    return slug.strip('_-')


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Map ``fn`` over ``items`` preserving order.

    With ``threads <= 1`` this is a plain loop. Results come back in input
    order either way.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
