import argparse
import json
import logging
import os
import sys
import time

import numpy as np
from nanome.util import Logs

from . import __version__
from .born import JitterModel, closed_form_width, coefficients, empirical_distribution, gaussian_model, total_variation
from .chaos import RosslerParams, feigenbaum_delta, feigenbaum_ratios, fine_structure, rossler_trajectory, scaling_law_report
from .collapse import PATH_CHOICES, collapse_batch
from .elliptic import (
    METHOD_LATTICE_SUM, METHOD_Q_EXPANSION, Lattice, lattice_invariants, wp_grid)
from .epr import EPRSetup, epr_batch, epr_collapse, key_exchange, ledger_from_setup
from .forms import ConfigError, resolve_config
from .ledger import LedgerConfig, render_json, render_table, run_ledger
from .managers import OutputManager
from .models import ClaimStatus
from .numtheory import ArithmeticTable, arithmetic_table, lcm_range, om_wave_function
from .omcore import EvaluationError, OMConstants, OMScale
from .utils import log_elapsed_time
from .zeta import find_zeros, riemann_siegel_z, zero_count_estimate


COMMANDS = ('collapse', 'born', 'epr', 'weierstrass', 'zeros', 'numtheory', 'chaos', 'verify')
TRAJECTORY_STRIDE = 10


class ObservationLab:
    """Runs one command against a resolved configuration and writes its artifacts."""

    def __init__(self, command, settings, workers=None):
        if command not in COMMANDS:
            raise ValueError(f'unknown command {command!r}, expected one of {COMMANDS}')
        self.command = command
        self.settings = settings
        self.workers = workers
        self.constants = OMConstants.from_settings(settings['constants'])
        run = settings['run']
        self.output = OutputManager(run['out_dir'], run['formats'], command, settings)

    def run(self, args=None):
        """Run the command, write the manifest and return the one-line summary."""
        start_time = time.time()
        handler = getattr(self, f'run_{self.command}')
        summary = handler(args)
        self.output.write_manifest()
        log_elapsed_time(start_time, f'Command {self.command}', command=self.command)
        return summary

    @property
    def table(self):
        return arithmetic_table(self.settings['precision']['table_bound'])

    def run_collapse(self, args=None):
        section = self.settings['collapse']
        scale = OMScale(section['l1'], section['n'])
        outcomes = collapse_batch([scale], section['path'], self.constants, self.table, self.workers)[0]
        agree = len({(o.k_star, o.phase) for o in outcomes}) == 1
        payload = {
            'l1': scale.l1, 'n': scale.n, 'reduction': scale.convention,
            'k_star': outcomes[0].k_star, 'paths_agree': agree,
            'outcomes': [o.to_dict() for o in outcomes],
        }
        if self.output.wants('json'):
            self.output.write_json('collapse.json', payload)
        if self.output.wants('csv'):
            self.output.write_csv(
                'collapse.csv', ('path', 'k_star', 'rotation_sum', 'phase_re', 'phase_im'),
                [(o.path, o.k_star, o.rotation_sum, o.phase.real, o.phase.imag) for o in outcomes])
        paths = ','.join(o.path for o in outcomes)
        return f'collapse l1={scale.l1} n={scale.n} k_star={outcomes[0].k_star} paths={paths} agree={agree}'

    def run_born(self, args=None):
        section = self.settings['born']
        scale = OMScale(section['l1'], section['n'])
        jitter = JitterModel(section['sigma'], self.settings['run']['seed'], section['samples'])
        distribution = empirical_distribution(scale, jitter, self.workers)
        model = gaussian_model(scale, section['sigma'], section['centering'])
        tv = total_variation(distribution.probabilities, model.probabilities)
        empirical = distribution.probabilities.tolist()
        if self.output.wants('json'):
            self.output.write_json('born.json', {
                'l1': scale.l1, 'n': scale.n, 'k_star': scale.k_star, 'sigma': section['sigma'],
                'samples': jitter.samples, 'seed': jitter.rng_seed, 'centering': model.centering,
                'counts': list(distribution.counts), 'model': list(model.probabilities),
                'total_variation': tv, 'width': model.width, 'floor_width': model.floor_width,
                'closed_form_width': closed_form_width(self.constants),
                'coefficients': coefficients(scale, self.constants).rows(),
            })
        if self.output.wants('csv'):
            self.output.write_csv(
                'born-histogram.csv', ('k', 'count', 'empirical_p', 'model_p'),
                [(k, count, empirical[k], model.probabilities[k]) for k, count in enumerate(distribution.counts)])
        if self.output.wants('svg'):
            from .plots import histogram_overlay
            self.output.write_svg('born-histogram.svg', histogram_overlay(
                empirical, model.probabilities, f'n = {scale.n}, sigma = {section["sigma"]:g}'))
        return f'born n={scale.n} samples={jitter.samples} seed={jitter.rng_seed} total_variation={tv:.6f}'

    def _epr_batch(self, path):
        with open(path) as f:
            records = epr_batch(f.read().splitlines(), self.workers)
        if self.output.wants('json'):
            self.output.write_json('epr-batch.json', records)
        if self.output.wants('csv'):
            header = (
                'line', 'l1a', 'l1b', 'b', 'n', 'parity', 'k_a', 'k_b', 'orient_a', 'orient_b', 'spin_a', 'spin_b',
                'error')
            self.output.write_csv(
                'epr-batch.csv', header, [tuple('' if r.get(key) is None else r[key] for key in header) for r in records])
        collapsed = [r for r in records if r['error'] is None]
        anticorrelated = all(r['orient_a'] * r['orient_b'] == -1 for r in collapsed)
        return (f'epr batch scenarios={len(collapsed)} anticorrelated={anticorrelated} '
                f'errors={len(records) - len(collapsed)}')

    def run_epr(self, args=None):
        batch = getattr(args, 'batch', None)
        if batch:
            return self._epr_batch(batch)
        section = self.settings['epr']
        setup = EPRSetup(section['l1a'], section['l1b'], section['b'], section['n'], section['parity'])
        outcome = epr_collapse(setup)
        share = key_exchange(setup)
        payload = {'outcome': outcome.to_dict(), 'key_share': share.to_dict(), 'volume_ledger': None}
        if min(setup.l1_a, setup.l1_b) - setup.b >= 1:
            phi = complex(section['phi_re'], section['phi_im'])
            payload['volume_ledger'] = ledger_from_setup(setup, phi, self.constants).to_dict()
        else:
            Logs.warning('Volume ledger skipped: it needs l1 - b >= 1 for both particles')
        if self.output.wants('json'):
            self.output.write_json('epr.json', payload)
        return (
            f'epr k_a={outcome.k_a} k_b={outcome.k_b} orient_a={outcome.orient_a} '
            f'orient_b={outcome.orient_b} key_agreed={share.agreed}')

    def run_weierstrass(self, args=None):
        section = self.settings['weierstrass']
        precision = self.settings['precision']
        lattice = Lattice.from_tau(complex(section['tau_re'], section['tau_im']))
        by_series = lattice_invariants(lattice, METHOD_Q_EXPANSION, cutoff=precision['series_cutoff'])
        by_sum = lattice_invariants(lattice, METHOD_LATTICE_SUM, radius=precision['lattice_radius'])
        agreement = max(
            abs(by_series.g2 - by_sum.g2) / max(1.0, abs(by_series.g2)),
            abs(by_series.g3 - by_sum.g3) / max(1.0, abs(by_series.g3)))
        grid = wp_grid(lattice, section['grid'], workers=self.workers)
        worst = max(residual for row in grid for _, residual in row)
        if self.output.wants('json'):
            self.output.write_json('weierstrass.json', {
                'tau': lattice.tau, 'grid': section['grid'],
                'invariants': [by_series.to_dict(), by_sum.to_dict()],
                'cross_method_relative_difference': agreement, 'max_ode_residual': worst,
            })
        if self.output.wants('csv'):
            self.output.write_csv(
                'weierstrass-grid.csv', ('re_z', 'im_z', 're_wp', 'im_wp', 'ode_residual'),
                [(p.z.real, p.z.imag, p.value.real, p.value.imag, residual) for row in grid for p, residual in row])
        if self.output.wants('svg'):
            from .plots import modulus_heatmap
            self.output.write_svg('weierstrass-modulus.svg', modulus_heatmap(
                [[p.value for p, _ in row] for row in grid], f'|wp| for tau = {lattice.tau:.4g}'))
        return f'weierstrass tau={lattice.tau} points={sum(len(row) for row in grid)} max_ode_residual={worst:.3e}'

    def run_zeros(self, args=None):
        t_max = self.settings['zeros']['t_max']
        table = find_zeros(t_max, self.settings['precision']['zero_precision'], workers=self.workers)
        estimate = zero_count_estimate(t_max) if t_max > 2 * np.pi else 0.0
        self.output.write_text('zeros.txt', table.to_text())
        if self.output.wants('json'):
            self.output.write_json('zeros.json', {
                't_max': t_max, 'precision': table.precision, 'count': table.count,
                'count_estimate': estimate, 'zeros': list(table.zeros),
            })
        if self.output.wants('csv'):
            self.output.write_csv('zeros.csv', ('j', 't'), list(enumerate(table.zeros, start=1)))
        if self.output.wants('svg'):
            from .plots import line_with_markers
            ts = np.linspace(0.0, t_max, 2000)
            self.output.write_svg('zeros-z.svg', line_with_markers(
                ts, [riemann_siegel_z(t) for t in ts], table.zeros, 'Z(t)', 't', 'Z(t)'))
        return f'zeros t_max={t_max:g} count={table.count} estimate={estimate:.2f}'

    def _load_or_build_table(self, bound, cache):
        if cache and os.path.exists(cache):
            table = ArithmeticTable.load(cache)
            if table.bound >= bound:
                Logs.message(f'Loaded arithmetic table from {cache}', extra={'bound': table.bound})
                return table
            Logs.warning(f'Cached table at {cache} only reaches {table.bound}, rebuilding to {bound}')
        table = arithmetic_table(bound)
        if cache:
            table.save(cache)
        return table

    def run_numtheory(self, args=None):
        section = self.settings['numtheory']
        bound = section['table_bound']
        table = self._load_or_build_table(bound, section['cache'])
        rows = min(section['rows'], bound)
        if self.output.wants('csv'):
            self.output.write_csv(
                'numtheory.csv', ('k', 'least_prime_factor', 'mu', 'mertens', 'lambda', 'psi'),
                [(k, int(table.least_prime_factor[k]), int(table.mu[k]), int(table.mertens_prefix[k]),
                  float(table.lambda_log[k]), float(table.psi_prefix[k])) for k in range(1, rows + 1)])
        wave_limit = min(rows, 200)
        wave_matches = all(om_wave_function(N, table) == lcm_range(N) for N in range(1, wave_limit + 1))
        summary = {
            'bound': bound, 'prime_count': int(len(table.primes)),
            'mertens_at_bound': int(table.mertens_prefix[bound]), 'psi_at_bound': float(table.psi_prefix[bound]),
            'wave_function_matches_lcm': wave_matches, 'wave_function_checked_to': wave_limit,
        }
        if self.output.wants('json'):
            self.output.write_json('numtheory.json', summary)
        return (
            f'numtheory bound={bound} primes={summary["prime_count"]} '
            f'mertens={summary["mertens_at_bound"]} psi={summary["psi_at_bound"]:.6f}')

    def run_chaos(self, args=None):
        section = self.settings['chaos']
        levels = section['feigenbaum_levels']
        delta = feigenbaum_delta(levels)
        params = RosslerParams(
            section['a'], section['b'], section['c'], section['dt'], section['t_total'], section['transient'])
        scaling = scaling_law_report(params, section['scaling_k'])
        constants = self.settings['constants']
        readings = fine_structure(constants['D'], constants['delta'])
        trajectory = rossler_trajectory(params, stride=TRAJECTORY_STRIDE)
        if self.output.wants('json'):
            self.output.write_json('chaos.json', {
                'feigenbaum_levels': levels, 'feigenbaum_delta': delta, 'ratios': feigenbaum_ratios(levels),
                'rossler': {'a': params.a, 'b': params.b, 'c': params.c, 'dt': params.dt, 't_total': params.t_total},
                'lyapunov': scaling.lyapunov, 'cycles': scaling.cycles, 'mean_period': scaling.mean_period,
                'measured_ratio': scaling.measured_ratio, 'formula_value': scaling.formula_value, 'K': scaling.K,
                'fine_structure': {
                    'printed': readings.reading_printed, 'matching': readings.reading_matching,
                    'closer_reading': readings.closer_reading},
            })
        if self.output.wants('csv'):
            self.output.write_csv('chaos-trajectory.csv', ('t', 'x', 'y', 'z'), trajectory)
        if self.output.wants('svg'):
            from .plots import phase_portrait
            self.output.write_svg('chaos-phase.svg', phase_portrait(
                [row[1] for row in trajectory], [row[2] for row in trajectory], f'Rossler c = {params.c:g}'))
        return f'chaos delta={delta:.9f} lyapunov={scaling.lyapunov:.5f} fine_structure={readings.reading_matching:.4f}'

    def run_verify(self, args=None):
        records = run_ledger(LedgerConfig.from_settings(self.settings), self.constants, self.workers)
        text = render_json(records)
        if self.output.wants('json'):
            self.output.write_text('ledger.json', text)
        if self.output.wants('csv'):
            self.output.write_csv(
                'ledger.csv', ('id', 'status', 'computed', 'reference', 'tolerance'),
                [(r.id, r.status.value, r.format_value(r.computed), r.format_value(r.reference), r.tolerance)
                 for r in records])
        if getattr(args, 'json', False):
            return text.rstrip('\n')
        if getattr(args, 'table', False):
            return render_table(records).rstrip('\n')
        counts = ' '.join(
            f'{status.value}={sum(1 for r in records if r.status == status)}' for status in ClaimStatus)
        return f'verify claims={len(records)} {counts}'


def _formats(text):
    return [part.strip() for part in text.split(',') if part.strip()]


def _rossler(text):
    try:
        return RosslerParams.from_string(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def create_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON file of dotted keys, defaults to $OMQM_CONFIG')
    common.add_argument('--out-dir', dest='run.out_dir')
    common.add_argument('--seed', dest='run.seed', type=int)
    common.add_argument('--formats', dest='run.formats', type=_formats, help='comma separated subset of json,csv,svg')
    common.add_argument('--svg', action='store_true', help='also write SVG figures')
    common.add_argument('--s-tilde-sign', dest='constants.s_tilde_sign', type=int, choices=(1, -1))
    common.add_argument('--alpha-tilde', dest='constants.alpha_tilde', type=float)
    common.add_argument('--D', dest='constants.D', type=float)
    common.add_argument('--delta', dest='constants.delta', type=float)
    common.add_argument('--workers', type=int)
    common.add_argument('-v', '--verbose', action='store_true')

    parser = argparse.ArgumentParser(prog='omqm', description='Observation modular QM computational laboratory')
    parser.add_argument('--version', action='version', version=__version__)
    subparsers = parser.add_subparsers(dest='command', required=True)

    collapse = subparsers.add_parser('collapse', parents=[common], help='collapse one scale')
    collapse.add_argument('--l1', dest='collapse.l1', type=int)
    collapse.add_argument('--n', dest='collapse.n', type=int)
    collapse.add_argument('--path', dest='collapse.path', choices=sorted(PATH_CHOICES))

    born = subparsers.add_parser('born', parents=[common], help='jittered outcome statistics')
    born.add_argument('--l1', dest='born.l1', type=int)
    born.add_argument('--n', dest='born.n', type=int)
    born.add_argument('--sigma', dest='born.sigma', type=float)
    born.add_argument('--samples', dest='born.samples', type=int)
    born.add_argument('--centering', dest='born.centering', choices=('cell', 'circle'))

    epr = subparsers.add_parser('epr', parents=[common], help='entangled pair collapse')
    epr.add_argument('--l1a', dest='epr.l1a', type=int)
    epr.add_argument('--l1b', dest='epr.l1b', type=int)
    epr.add_argument('--b', dest='epr.b', type=int)
    epr.add_argument('--n', dest='epr.n', type=int)
    epr.add_argument('--parity', dest='epr.parity', type=int, choices=(1, -1))
    epr.add_argument('--phi-re', dest='epr.phi_re', type=float)
    epr.add_argument('--phi-im', dest='epr.phi_im', type=float)
    epr.add_argument('--batch', help='JSON-lines file of scenarios')

    weierstrass = subparsers.add_parser('weierstrass', parents=[common], help='wp on a lattice grid')
    weierstrass.add_argument('--tau-re', dest='weierstrass.tau_re', type=float)
    weierstrass.add_argument('--tau-im', dest='weierstrass.tau_im', type=float)
    weierstrass.add_argument('--grid', dest='weierstrass.grid', type=int)

    zeros = subparsers.add_parser('zeros', parents=[common], help='critical-line zeros')
    zeros.add_argument('--t-max', dest='zeros.t_max', type=float)
    zeros.add_argument('--precision', dest='precision.zero_precision', type=float)

    numtheory = subparsers.add_parser('numtheory', parents=[common], help='arithmetic function table')
    numtheory.add_argument('--table-bound', dest='numtheory.table_bound', type=int)
    numtheory.add_argument('--rows', dest='numtheory.rows', type=int)
    numtheory.add_argument('--cache', dest='numtheory.cache')

    chaos = subparsers.add_parser('chaos', parents=[common], help='Feigenbaum cascade and Rossler flow')
    chaos.add_argument('--feigenbaum-levels', dest='chaos.feigenbaum_levels', type=int)
    chaos.add_argument('--rossler', type=_rossler, metavar='a,b,c,dt,t')
    chaos.add_argument('--transient', dest='chaos.transient', type=float)
    chaos.add_argument('--scaling-k', dest='chaos.scaling_k', type=float)

    verify = subparsers.add_parser('verify', parents=[common], help='evaluate the claim ledger')
    output = verify.add_mutually_exclusive_group()
    output.add_argument('--json', action='store_true', help='print the ledger JSON')
    output.add_argument('--table', action='store_true', help='print the ledger table')
    return parser


def overrides_from(args):
    """Dotted config keys set on the command line."""
    overrides = {key: value for key, value in vars(args).items() if '.' in key and value is not None}
    rossler = getattr(args, 'rossler', None)
    if rossler is not None:
        overrides.update({
            'chaos.a': rossler.a, 'chaos.b': rossler.b, 'chaos.c': rossler.c,
            'chaos.dt': rossler.dt, 'chaos.t_total': rossler.t_total})
    return overrides


def configure_logging(verbose=False):
    logging.basicConfig(
        stream=sys.stderr, level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(message)s')
    logging.getLogger().setLevel(logging.DEBUG if verbose else logging.INFO)


def dispatch(argv=None):
    """Run one command. Exit status 2 for usage or configuration errors, 1 for failed evaluations."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    configure_logging(args.verbose)
    try:
        settings = resolve_config(overrides_from(args), path=args.config)
    except ConfigError as e:
        parser.print_usage(sys.stderr)
        Logs.error(f'Invalid configuration: {json.dumps(e.errors, sort_keys=True)}')
        return 2
    if args.svg and 'svg' not in settings['run']['formats']:
        settings['run']['formats'].append('svg')
    try:
        lab = ObservationLab(args.command, settings, workers=args.workers)
        summary = lab.run(args)
    except (EvaluationError, ValueError, OSError) as e:
        Logs.error(f'{args.command} failed: {type(e).__name__}: {e}', extra={'command': args.command})
        return 1
    print(summary)
    return 0


def main():
    return dispatch(sys.argv[1:])
