"""
Experiment runner: dispatch a subcommand on its fixture and write artifacts.

Every run writes summary.txt (key=value lines, floats with 17 significant
digits), one or more CSV traces, and manifest.json with the MD5 of each
artifact. Module errors end the run with their own exit code and a single
``ERROR <code>: <message>`` line on stderr.
"""

import logging
import sys
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .config import RunConfig
from .continuation import TRACE_HEADER, StepControl, continue_along
from .csvio import CoefficientCSV, TraceCSV, write_jet_csv, write_loop_csv
from .dbar import cauchy_transform, laurent_split_cover, solve_cousin, sup_constant
from .errors import HartogsKitError
from .fixtures import (ContinueFixture, CousinFixture, DbarFixture, ExtendFixture,
                       LoopspaceFixture, NormalizeFixture, build_fixture)
from .hartogs import ExtensionSettings, HartogsFigure, extend_bidim
from .ledger import ArtifactLedger
from .loopspace import ball_automorphism, extend_loop_family, mobius_disk_family, sobolev_norm
from .royden import NORM_TRACE_HEADER, assemble_tubular_map, normalize_transitions
from .utils import format_real

logger = logging.getLogger(__name__)

SUMMARY_NAME = 'summary.txt'
GRID_RADIUS = 0.9

Artifacts = List[Tuple[Path, str]]


def target_grid(figure: HartogsFigure, count: int) -> np.ndarray:
    """
    ``count`` points of B^q x B^n on a spiral through the origin.

    Base and fibre blocks both have norm s < 0.9 in either model.
    """
    s = np.linspace(0.0, GRID_RADIUS, count)
    phase = np.exp(1j * np.arange(count))
    q, k = figure.q, figure.fibre_dim
    base = (s * phase)[:, None] * np.ones(q) / np.sqrt(q)
    fibre = (s * np.conj(phase))[:, None] * np.ones(k) / np.sqrt(k)
    return np.hstack([base, fibre])


def write_summary(path: Path, summary: Dict[str, object]) -> Path:
    lines = []
    for key, value in summary.items():
        if isinstance(value, (bool, np.bool_)):
            text = 'true' if value else 'false'
        elif isinstance(value, (float, np.floating)):
            text = format_real(value)
        else:
            text = ' '.join(str(value).split())
        lines.append(f"{key}={text}")
    path.write_text('\n'.join(lines) + '\n')
    return path


class ExperimentRunner:
    """Runs one configured subcommand and records its artifacts"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out_dir = Path(config.out_dir)
        self.ledger = ArtifactLedger(self.out_dir)
        self.summary: Dict[str, object] = {}
        self.artifacts: Artifacts = []

    def settings(self) -> ExtensionSettings:
        return ExtensionSettings(tolerance=self.config.tolerance, seed=self.config.seed,
                                 node_count=self.config.nodes)

    def _trace(self, name: str, header, rows) -> None:
        path = TraceCSV.write(self.out_dir / name, header, rows)
        self.artifacts.append((path, 'trace'))

    # --- subcommands ---------------------------------------------------------

    def extend(self, fixture: ExtendFixture) -> None:
        grid = target_grid(fixture.figure, self.config.grid)
        result = extend_bidim(fixture.f, fixture.figure, grid, self.settings())
        self.summary.update(result.summary())
        self.summary['max_overlap_residual'] = result.report['overlap_residual']

        values = np.asarray(result.grid_values, dtype=complex).reshape(grid.shape[0], -1)
        error = np.zeros(values.shape)
        if fixture.closed_form is not None:
            exact = np.asarray(fixture.closed_form(grid), dtype=complex).reshape(values.shape)
            error = np.abs(values - exact)
            self.summary['closed_form_error'] = float(np.max(error))
        rows = []
        for i in range(grid.shape[0]):
            norm = float(np.linalg.norm(grid[i]))
            for c in range(values.shape[1]):
                rows.append([i, norm, c, float(values[i, c].real), float(values[i, c].imag),
                             float(error[i, c])])
        self._trace('extension_grid.csv', ['index', 'norm', 'component', 're', 'im', 'error'], rows)

        table = result.coefficients(np.zeros(fixture.figure.dim))
        self.artifacts.append((CoefficientCSV.write(table, self.out_dir / 'coefficients.csv'), 'coefficients'))

    def dbar(self, fixture: DbarFixture) -> None:
        domain = fixture.domain
        u = cauchy_transform(fixture.g, domain)
        points, weights = domain.lattice
        g_values = np.asarray(fixture.g(points.reshape(-1)), dtype=complex).reshape(points.shape)
        g_sup = float(np.max(np.abs(g_values[weights > 0])))
        constant = sup_constant(domain)
        u_sup = u.sup_norm()
        self.summary.update({
            'domain': domain.kind, 'spacing': domain.spacing,
            'residual': u.residual, 'expected_bound': u.expected_bound,
            'sup_constant': constant, 'g_sup': g_sup, 'u_sup': u_sup,
            'estimate_holds': u_sup <= constant * g_sup * (1.0 + 1e-9),
        })
        if fixture.solution is not None:
            keep = domain.interior_mask()
            exact = fixture.solution(points)
            self.summary['solution_error'] = float(np.max(np.abs(u.values - exact)[keep]))

        middle = points.shape[0] // 2
        rows = [[float(z.real), float(z.imag), float(v.real), float(v.imag), float(g.real), float(g.imag)]
                for z, v, g, w in zip(points[middle], u.values[middle], g_values[middle], weights[middle])
                if w > 0]
        self._trace('dbar_profile.csv', ['x', 'y', 'u_re', 'u_im', 'g_re', 'g_im'], rows)

    def cousin(self, fixture: CousinFixture) -> None:
        solution = solve_cousin(fixture.cover, fixture.cocycle, self.config.method,
                                self.config.spacing, self.config.tolerance)
        self.summary.update({'method': solution.method, 'delta_residual': solution.delta_residual,
                             'constant': solution.constant, 'ratio': solution.ratio,
                             'estimate_holds': solution.ratio <= solution.constant})
        for alpha, value in sorted(solution.cr_residuals.items()):
            self.summary[f'cr_residual_{alpha}'] = value

        inner, outer, _, _, mid = laurent_split_cover(fixture.cover)
        theta = 2.0 * np.pi * np.arange(64) / 64
        z = mid * np.exp(1j * theta)
        gap = (solution.evaluate(inner, z) - solution.evaluate(outer, z)
               - fixture.cocycle.value(inner, outer, z))
        gap = np.linalg.norm(gap, axis=1)
        self.summary['overlap_gap'] = float(np.max(gap))
        self._trace('cousin_overlap.csv', ['theta', 'gap'],
                    [[float(a), float(b)] for a, b in zip(theta, gap)])

    def normalize(self, fixture: NormalizeFixture) -> None:
        result = normalize_transitions(fixture.atlas, self.config.degree, self.config.tolerance,
                                       self.config.threads)
        lo, hi = result.epsilon_interval
        self.summary.update({'degree': result.degree, 'epsilon': result.epsilon,
                             'epsilon_lo': lo, 'epsilon_hi': hi, 'residual': result.residual,
                             'consistency': fixture.atlas.consistency()})
        if fixture.expected is not None:
            self.summary['change_error'] = max(
                (result.changes[alpha] - fixture.expected[alpha]).max_abs() for alpha in (0, 1))
        tube = assemble_tubular_map(result, seed=self.config.seed)
        self.summary.update({'tube_radius': tube.radius, 'agreement': tube.agreement,
                             'restriction_defect': tube.restriction_defect})

        self._trace('norm_table.csv', NORM_TRACE_HEADER, result.trace_rows())
        for alpha in (0, 1):
            path = write_jet_csv(result.changes[alpha], self.out_dir / f'change_{alpha}.csv')
            self.artifacts.append((path, 'jet'))

    def continue_(self, fixture: ContinueFixture) -> None:
        control = StepControl(r=self.config.r, rho=self.config.rho, initial_step=self.config.step,
                              tolerance=self.config.tolerance, seed=self.config.seed)
        result = continue_along(fixture.f, fixture.family, control, fixture.region)
        final = result.final
        center = fixture.family.at(final.t, [0.0])
        value = complex(np.asarray(final.evaluate(center, 0.0)).reshape(-1)[0])
        self.summary.update({
            'final_t': final.t, 'elements': len(result.elements),
            'interior_margin': result.report.interior_margin,
            'boundary_margin': result.report.boundary_margin,
            'modulus': result.report.modulus,
            'center_re': value.real, 'center_im': value.imag,
        })
        if fixture.closed_form is not None:
            exact = complex(np.asarray(fixture.closed_form(center)).reshape(-1)[0])
            self.summary['closed_form_error'] = abs(value - exact)
        self._trace('continue_trace.csv', TRACE_HEADER, [list(row) for row in result.trace])

    def loopspace(self, fixture: LoopspaceFixture) -> None:
        family = fixture.family
        extended = extend_loop_family(family, settings=self.settings(), threads=self.config.threads)
        self.summary.update({'boundary_max': extended.boundary_max,
                             'interior_max': extended.interior_max,
                             'modulus': extended.modulus, 'tail_ratio': extended.tail_ratio})

        grid = target_grid(family.figure, self.config.grid)
        norms = extended.sobolev_at(grid)
        self.summary['certificate_holds'] = bool(np.all(norms <= extended.boundary_max * (1.0 + 1e-6)))
        order, values = extended.coefficients(grid)
        error = 0.0
        for i, m in enumerate(order):
            exact = np.asarray(fixture.closed_forms[int(m)](grid), dtype=complex).reshape(grid.shape[0], -1)
            error = max(error, float(np.max(np.abs(values[:, i] - exact))))
        self.summary['max_mode_error'] = error
        self._trace('loop_norms.csv', ['index', 'norm', 'sobolev_norm', 'boundary_max'],
                    [[i, float(np.linalg.norm(grid[i])), float(norms[i]), extended.boundary_max]
                     for i in range(grid.shape[0])])
        center = extended.loop_at(np.zeros(family.figure.dim))
        self.artifacts.append((write_loop_csv(center, self.out_dir / 'loop_center.csv'), 'loop'))

        if fixture.base_loop is not None:
            disks = mobius_disk_family(fixture.base_loop, fixture.fibre_loop,
                                       np.linspace(0.0, 1.0, self.config.grid))
            s = 2.0 * np.pi * np.arange(disks.nodes) / disks.nodes
            a = fixture.base_loop.evaluate(s)
            z = 0.5 * np.exp(1j * s)[:, None] * np.ones((1, disks.q)) / np.sqrt(disks.q)
            involution = float(np.max(np.abs(ball_automorphism(a, ball_automorphism(a, z)) - z)))
            through = disks.loop_at(1.0, np.zeros(disks.q), self.config.k, self.config.modes)
            self.summary.update({'mobius_shell': disks.shell, 'involution_defect': involution,
                                 'disk_loop_norm': sobolev_norm(through)})

    HANDLERS = {
        'extend': extend, 'dbar': dbar, 'cousin': cousin,
        'normalize': normalize, 'continue': continue_, 'loopspace': loopspace,
    }

    # --- driver --------------------------------------------------------------

    def run(self) -> int:
        """
        Run the configured subcommand

        Returns:
            Process exit code (0 on success)
        """
        config = self.config
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.ledger.load()
        self.summary = {'subcommand': config.subcommand, 'fixture': config.fixture}
        self.summary.update({key: value for key, value in config.describe().items()
                             if key not in ('subcommand', 'fixture', 'log_level', 'threads')})
        logger.info(f"▶️  {config.subcommand} on fixture {config.fixture}")

        exit_code = 0
        try:
            fixture = build_fixture(config)
            self.HANDLERS[config.subcommand](self, fixture)
            self.summary['status'] = 'ok'
            logger.info(f"✅ {config.subcommand} finished")
        except HartogsKitError as e:
            reason = ' '.join(str(e).split())
            self.summary.update({'status': 'error', 'error': e.code, 'reason': reason})
            print(f"ERROR {e.code}: {reason}", file=sys.stderr)
            logger.error(f"❌ {config.subcommand} failed: {reason}")
            exit_code = e.exit_code

        self.artifacts.append((write_summary(self.out_dir / SUMMARY_NAME, self.summary), 'summary'))
        for path, kind in self.artifacts:
            self.ledger.update(path, kind)
        self.ledger.save()
        stats = self.ledger.get_stats()
        logger.info(f"📝 {stats['total_entries']} artifacts in {self.out_dir}, {stats['changed']} changed")
        return exit_code


def run(config: RunConfig) -> int:
    """Run one subcommand and return its exit code"""
    return ExperimentRunner(config).run()
