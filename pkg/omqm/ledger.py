import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from nanome.util import Logs

from .born import closed_form_width
from .chaos import FINE_STRUCTURE_INVERSE, fine_structure
from .elliptic import identity_ledger
from .models import ClaimRecord, ClaimStatus
from .numtheory import DEFAULT_TABLE_BOUND, arithmetic_table, chebyshev_psi, dirichlet_mobius_sum, lcm_range, mertens
from .omcore import FEIGENBAUM_DELTA, FRACTAL_DIMENSION, OMConstants, collapse_indices
from .utils import log_elapsed_time, worker_count
from .zeta import log_derivative_numeric, log_derivative_series, prime_power_zeta_sum, zeta_real


__all__ = ['LedgerConfig', 'CLAIM_IDS', 'run_ledger', 'render_json', 'render_table']


@dataclass(frozen=True)
class LedgerConfig:
    fifty_fifty_n: int = 10000
    series_cutoff: int = 10 ** 6
    mertens_limit: int = 100
    dirichlet_limit: int = 10000
    fine_structure_tolerance: float = 0.05
    psi_limit: int = 200
    D: float = FRACTAL_DIMENSION
    delta: float = FEIGENBAUM_DELTA
    table_bound: int = DEFAULT_TABLE_BOUND

    @classmethod
    def from_settings(cls, settings):
        """Read the verify, constants and precision sections of a resolved configuration."""
        settings = settings or {}
        verify = {k: v for k, v in (settings.get('verify') or {}).items() if v is not None}
        constants = settings.get('constants') or {}
        precision = settings.get('precision') or {}
        return cls(
            table_bound=precision.get('table_bound') or DEFAULT_TABLE_BOUND,
            D=constants.get('D') or FRACTAL_DIMENSION,
            delta=constants.get('delta') or FEIGENBAUM_DELTA,
            **verify)


def _fifty_fifty(config, constants):
    N = config.fifty_fifty_n
    scales = np.arange(4 * N, dtype=np.int64)
    counts = np.bincount(collapse_indices(scales, 2), minlength=2)
    return [ClaimRecord.evaluate(
        'n2-fifty-fifty', counts[0] / (4 * N), 0.5, 0.0,
        f'share of k* = 0 over l1 in 0..{4 * N - 1} with n = 2',
        {'zeros': int(counts[0]), 'ones': int(counts[1])})]


def _fine_structure(config, constants):
    result = fine_structure(config.D, config.delta)
    tolerance = config.fine_structure_tolerance
    return [
        ClaimRecord.evaluate(
            'eq8-printed', result.reading_printed, FINE_STRUCTURE_INVERSE, tolerance,
            'D * sqrt(exp(sqrt(pi * delta))) as printed'),
        ClaimRecord.evaluate(
            'eq8-matching', result.reading_matching, FINE_STRUCTURE_INVERSE, tolerance,
            'D * exp(sqrt(pi * delta))'),
    ]


def _dirichlet(config, constants):
    table = arithmetic_table(config.table_bound)
    limit = config.dirichlet_limit
    sums = [dirichlet_mobius_sum(k, table) for k in range(1, limit + 1)]
    ones = sum(1 for s in sums if s == 1)
    identity_holds = sums[0] == 1 and not any(sums[1:])
    return [ClaimRecord.evaluate(
        'eq38', ones / limit, 1.0, 0.0,
        f'share of k <= {limit} whose divisor sum of mu equals 1',
        {'dirichlet_identity_holds': identity_holds})]


def _mertens(config, constants):
    limit = config.mertens_limit
    table = arithmetic_table(config.table_bound)
    values = [mertens(k, table) for k in range(1, limit + 1)]
    ones = sum(1 for value in values if value == 1)
    return [ClaimRecord.evaluate(
        'eq39', ones / limit, 1.0, 0.0,
        f'share of k <= {limit} with M(k) = 1',
        {'mertens': {str(k): value for k, value in enumerate(values, start=1)}})]


def _log_derivative(config, constants):
    series = log_derivative_series(2.0, config.series_cutoff)
    numeric = log_derivative_numeric(2.0)
    return [ClaimRecord.evaluate(
        'eq50', series.value, numeric, 1e-5,
        f'-sum Lambda(q)/q^2 to {config.series_cutoff} against the difference quotient of ln zeta',
        {'tail_bound': series.tail_bound})]


def _prime_power_sum(config, constants):
    partial = prime_power_zeta_sum(2.0, config.series_cutoff)
    return [ClaimRecord.evaluate(
        'prime-power-zeta-sum', partial.value, zeta_real(2.0), partial.tail_bound,
        'sum of q^-2 over prime powers against zeta(2)',
        {'tail_bound': partial.tail_bound})]


def _psi_lcm(config, constants):
    table = arithmetic_table(config.table_bound)
    worst = max(
        abs(chebyshev_psi(N, table) - math.log(lcm_range(N))) for N in range(1, config.psi_limit + 1))
    return [ClaimRecord.evaluate(
        'psi-lcm', worst, 0.0, 1e-9, f'max |psi(N) - ln lcm(1..N)| for N <= {config.psi_limit}')]


def _born_width(config, constants):
    width = closed_form_width(constants)
    neighbour = math.exp(-math.pi ** 2 / (constants.A + constants.B))
    return [ClaimRecord.evaluate(
        'born-width', width, None, 0.0, 'sqrt(A + B) / (pi sqrt 2)',
        {'coefficient_at_distance_1': neighbour})]


def _elliptic(config, constants):
    return identity_ledger(constants)


PROVIDERS = {
    ('n2-fifty-fifty',): _fifty_fifty,
    ('eq8-printed', 'eq8-matching'): _fine_structure,
    ('eq38',): _dirichlet,
    ('eq39',): _mertens,
    ('eq50',): _log_derivative,
    ('prime-power-zeta-sum',): _prime_power_sum,
    ('psi-lcm',): _psi_lcm,
    ('born-width',): _born_width,
    ('eq57-printed', 'eq66', 'eq67', 'invariants-cross-method', 'quartic-sextic-constants',
     'weierstrass-ode-standard'): _elliptic,
}

CLAIM_IDS = tuple(sorted(claim_id for ids in PROVIDERS for claim_id in ids))


def _evaluate(claim_ids, provider, config, constants):
    try:
        return provider(config, constants)
    except Exception as e:
        Logs.warning(f'Claim evaluation failed for {", ".join(claim_ids)}: {e}')
        return [ClaimRecord.failed(claim_id, e) for claim_id in claim_ids]


def run_ledger(config=None, constants=None, workers=None):
    """Evaluate every claim. Failures are recorded in-band; output is ordered by id."""
    config = config or LedgerConfig()
    constants = constants or OMConstants()
    start_time = time.time()
    with ThreadPoolExecutor(max_workers=worker_count(workers)) as executor:
        futures = [
            executor.submit(_evaluate, claim_ids, provider, config, constants)
            for claim_ids, provider in PROVIDERS.items()]
        records = [record for future in futures for record in future.result()]
    records.sort(key=lambda record: record.id)
    for record in records:
        Logs.debug(f'{record.id}: {record.status.value}', extra={'claim_id': record.id, 'status': record.status.value})
    counts = {status.value: sum(1 for r in records if r.status == status) for status in ClaimStatus}
    Logs.message(f'Ledger evaluated {len(records)} claims', extra=counts)
    log_elapsed_time(start_time, 'Ledger run', claim_count=len(records))
    return records


def render_json(records):
    return json.dumps([record.to_dict() for record in records], sort_keys=True, indent=2) + '\n'


def render_table(records):
    header = ('id', 'status', 'computed', 'reference', 'tolerance')
    rows = [
        (r.id, r.status.value, r.format_value(r.computed), r.format_value(r.reference), f'{r.tolerance:g}')
        for r in records]
    widths = [max(len(str(row[i])) for row in [header] + rows) for i in range(len(header))]
    lines = ['  '.join(str(cell).ljust(width) for cell, width in zip(row, widths)).rstrip() for row in [header] + rows]
    return '\n'.join(lines) + '\n'
