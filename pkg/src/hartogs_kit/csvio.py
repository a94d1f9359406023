"""
CSV layouts for series, coefficient tables and run traces.

A series is written one row per (degree, multi-index, component) with the
real and imaginary parts in two columns; the header fixes column order.
Coefficient tables from the quadrature module reuse the same layout with
the multi-index holding (signed) Laurent indices. Jets over the annulus
add a column for the power of z. Loops are written as (m, component) rows.
"""

import csv
import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import LoopError, RoydenError, SeriesError
from .jets import JetMap, JetSpace
from .loopspace import SobolevLoop
from .quadrature import LaurentCoefficients, PolytorusCoefficients
from .series import HomogeneousMap, PowerSeriesMap, TruncatedVector
from .utils import format_real

logger = logging.getLogger(__name__)

SERIES_HEADER = ['degree', 'multi_index', 'component', 're', 'im']
JET_HEADER = ['component', 'multi_index', 'power', 're', 'im']
LOOP_HEADER = ['m', 'component', 're', 'im']


def _index_text(alpha: Sequence[int]) -> str:
    return ' '.join(str(int(a)) for a in alpha)


def _parse_index(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in text.split())


class SeriesCSV:
    """Write and read PowerSeriesMap coefficient tables"""

    @staticmethod
    def rows(series: PowerSeriesMap) -> List[List[str]]:
        rows = []
        for term in series.terms:
            if term.degree == 0:
                monomials = {(0,) * series.in_dim: term.evaluate(np.zeros(series.in_dim))}
            else:
                monomials = term.monomials()
            for alpha in sorted(monomials):
                coef = monomials[alpha]
                for component, value in enumerate(coef):
                    if value == 0:
                        continue
                    rows.append([str(term.degree), _index_text(alpha), str(component),
                                 format_real(value.real), format_real(value.imag)])
        return rows

    @staticmethod
    def write(series: PowerSeriesMap, path: Path) -> Path:
        """
        Write a series to CSV.

        Raises:
            SeriesError: If a term is evaluation-only and has no monomial form
        """
        path = Path(path)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(SERIES_HEADER)
            writer.writerows(SeriesCSV.rows(series))
        logger.debug(f"wrote series of order {series.order} to {path}")
        return path

    @staticmethod
    def read(path: Path, center, out_dim: int, radius: Optional[float] = None,
             polynomial: bool = False) -> PowerSeriesMap:
        """
        Read a series written by ``write``.

        Args:
            path: CSV file
            center: Expansion point (not stored in the file)
            out_dim: Output dimension
            radius: Radius to attach; fitted when omitted
            polynomial: Whether the series is a polynomial
        """
        center = center if isinstance(center, TruncatedVector) else TruncatedVector.of(*np.atleast_1d(center))
        by_degree: Dict[int, Dict[Tuple[int, ...], np.ndarray]] = defaultdict(dict)
        with Path(path).open(newline='') as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != SERIES_HEADER:
                raise SeriesError(f"unexpected series header {reader.fieldnames}")
            for row in reader:
                degree = int(row['degree'])
                alpha = _parse_index(row['multi_index'])
                coef = by_degree[degree].setdefault(alpha, np.zeros(out_dim, dtype=complex))
                coef[int(row['component'])] += complex(float(row['re']), float(row['im']))

        order = max(by_degree) if by_degree else 0
        terms = []
        for n in range(order + 1):
            if by_degree.get(n):
                if n == 0:
                    terms.append(HomogeneousMap.constant(next(iter(by_degree[0].values()))))
                else:
                    terms.append(HomogeneousMap.from_monomials(by_degree[n], center.dim, out_dim))
            else:
                terms.append(HomogeneousMap.zero(n, center.dim, out_dim))
        return PowerSeriesMap.build(center, terms, radius, polynomial)


class CoefficientCSV:
    """Coefficient tables from circle and polytorus quadrature"""

    @staticmethod
    def write(table, path: Path) -> Path:
        path = Path(path)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(SERIES_HEADER)
            for alpha, coef in CoefficientCSV._entries(table):
                coef = np.atleast_1d(coef)
                degree = sum(alpha)
                for component, value in enumerate(coef):
                    writer.writerow([str(degree), _index_text(alpha), str(component),
                                     format_real(value.real), format_real(value.imag)])
        return path

    @staticmethod
    def _entries(table) -> Iterable[Tuple[Tuple[int, ...], np.ndarray]]:
        if isinstance(table, LaurentCoefficients):
            for k in table.indices:
                yield (int(k),), table.coefficient(int(k))
        elif isinstance(table, PolytorusCoefficients):
            q = len(table.lower)
            for idx in np.ndindex(*table.table.shape[:q]):
                alpha = tuple(i + lo for i, lo in zip(idx, table.lower))
                yield alpha, table.table[idx]
        else:
            raise TypeError(f"unsupported coefficient table {type(table).__name__}")


class TraceCSV:
    """Plain numeric traces (norm tables, margins, step logs)"""

    @staticmethod
    def write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = Path(path)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(list(header))
            for row in rows:
                writer.writerow([format_real(v) if isinstance(v, float) else str(v) for v in row])
        return path

    @staticmethod
    def read(path: Path) -> List[Dict[str, str]]:
        with Path(path).open(newline='') as handle:
            return list(csv.DictReader(handle))


def write_series_csv(series: PowerSeriesMap, path: Path) -> Path:
    return SeriesCSV.write(series, path)


def read_series_csv(path: Path, center, out_dim: int, radius: Optional[float] = None,
                    polynomial: bool = False) -> PowerSeriesMap:
    return SeriesCSV.read(path, center, out_dim, radius, polynomial)


class JetCSV:
    """Chart transitions as (component, w-exponent, z-power) coefficient rows"""

    @staticmethod
    def write(jet: JetMap, path: Path) -> Path:
        path = Path(path)
        space = jet.space
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(JET_HEADER)
            for c, row, col in zip(*np.nonzero(jet.coeffs)):
                value = jet.coeffs[c, row, col]
                writer.writerow([str(c), _index_text(space.monomials[row]), str(int(space.powers[col])),
                                 format_real(value.real), format_real(value.imag)])
        return path

    @staticmethod
    def read(path: Path, space: JetSpace) -> JetMap:
        """
        Raises:
            RoydenError: If the header is wrong or a row falls outside the jet space
        """
        coeffs = np.zeros((space.fibre_dim + 1, space.size, space.width), dtype=complex)
        with Path(path).open(newline='') as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != JET_HEADER:
                raise RoydenError(f"unexpected jet header {reader.fieldnames}")
            for row in reader:
                beta = _parse_index(row['multi_index'])
                power = int(row['power'])
                component = int(row['component'])
                if beta not in space.index or abs(power) > space.band or component > space.fibre_dim:
                    raise RoydenError(f"row {row} does not fit {space}")
                coeffs[component, space.index[beta], space.column(power)] += complex(
                    float(row['re']), float(row['im']))
        return JetMap(space, coeffs)


def write_jet_csv(jet: JetMap, path: Path) -> Path:
    return JetCSV.write(jet, path)


def read_jet_csv(path: Path, space: JetSpace) -> JetMap:
    return JetCSV.read(path, space)


class LoopCSV:
    """Sobolev loops as (m, component) Fourier coefficient rows"""

    @staticmethod
    def write(loop: SobolevLoop, path: Path) -> Path:
        path = Path(path)
        with path.open('w', newline='') as handle:
            writer = csv.writer(handle)
            writer.writerow(LOOP_HEADER)
            for m in loop.modes:
                for component, value in enumerate(loop.coefficient(int(m))):
                    writer.writerow([str(int(m)), str(component),
                                     format_real(value.real), format_real(value.imag)])
        return path

    @staticmethod
    def read(path: Path, k: int = 1) -> SobolevLoop:
        """
        Raises:
            LoopError: If the header is wrong or the table is empty
        """
        modes: Dict[int, Dict[int, complex]] = defaultdict(dict)
        with Path(path).open(newline='') as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames != LOOP_HEADER:
                raise LoopError(f"unexpected loop header {reader.fieldnames}")
            for row in reader:
                modes[int(row['m'])][int(row['component'])] = complex(float(row['re']), float(row['im']))
        if not modes:
            raise LoopError(f"no loop coefficients in {path}")
        dim = 1 + max(c for entry in modes.values() for c in entry)
        table = {m: [entry.get(c, 0j) for c in range(dim)] for m, entry in modes.items()}
        return SobolevLoop.from_modes(table, dim, k)


def write_loop_csv(loop: SobolevLoop, path: Path) -> Path:
    return LoopCSV.write(loop, path)


def read_loop_csv(path: Path, k: int = 1) -> SobolevLoop:
    return LoopCSV.read(path, k)
