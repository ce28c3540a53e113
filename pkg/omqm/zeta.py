import cmath
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from nanome.util import Logs
from scipy import optimize, special

from .models import SeriesValue
from .numtheory import DEFAULT_TABLE_BOUND, arithmetic_table, von_mangoldt
from .omcore import EvaluationError, OMConstants
from .utils import chunks, log_elapsed_time, worker_count


__all__ = [
    'PoleError', 'ConvergenceError', 'NotPrimePowerError', 'ZetaZeroTable',
    'zeta_real', 'zeta_complex', 'zeta_offset', 'zeta_inverse_offset', 'zeta_inverse',
    'riemann_siegel_theta', 'riemann_siegel_z',
    'find_zeros', 'zero_count_estimate', 'log_derivative_series', 'log_derivative_numeric',
    'prime_power_zeta_sum', 'om_mass', 'om_energy_sq']


POLE_MARGIN = 1e-6
INVERSE_DPS = 30
DEFAULT_TOLERANCE = 1e-12
MAX_ZERO_HEIGHT = 120.0
MIN_ZERO_PRECISION = 1e-8
SCAN_STEP = 0.05
ZERO_TABLE_HEADER = '# omqm-zeros v1 precision='

_EM_TERMS = 15
_BERNOULLI = special.bernoulli(2 * _EM_TERMS)
# B_2k / (2k)! for k = 1..15
_EM_COEFFICIENTS = tuple(float(_BERNOULLI[2 * k]) / math.factorial(2 * k) for k in range(1, _EM_TERMS + 1))
_MAX_CUTOFF = 10240


class PoleError(EvaluationError, ValueError):
    pass


class ConvergenceError(EvaluationError):
    pass


class NotPrimePowerError(ValueError):
    pass


def _euler_maclaurin(s, N, tolerance):
    """zeta(s) from the first N - 1 terms plus Euler-Maclaurin corrections at N."""
    n = np.arange(1, N, dtype=np.float64)
    total = np.sum(n ** (-s)) + N ** (1 - s) / (s - 1) + N ** (-s) / 2
    rising = s
    power = N ** (-s - 1)
    term = 0.0
    for k, coefficient in enumerate(_EM_COEFFICIENTS, start=1):
        term = coefficient * rising * power
        total += term
        if abs(term) < tolerance * 1e-3:
            break
        rising *= (s + 2 * k - 1) * (s + 2 * k)
        power /= N * N
    bound = abs(term)
    if isinstance(s, complex):
        bound *= abs(s + 2 * k + 1) / (s.real + 2 * k + 1)
    return SeriesValue(total, bound)


def _zeta_series(s, cutoff, tolerance):
    N = cutoff
    while N <= _MAX_CUTOFF:
        series = _euler_maclaurin(s, N, tolerance)
        if series.tail_bound <= tolerance:
            return series
        N *= 2
    raise ConvergenceError(f'zeta({s}) did not reach tolerance {tolerance} with cutoff up to {_MAX_CUTOFF}')


def zeta_real(s, tolerance=DEFAULT_TOLERANCE, cutoff=10):
    """Riemann zeta at real s > 1 via Euler-Maclaurin summation."""
    s = float(s)
    if not math.isfinite(s):
        raise ValueError(f'zeta_real expects a finite argument, received {s}')
    if s <= 1 + POLE_MARGIN:
        raise PoleError(f'zeta_real requires s > 1 + {POLE_MARGIN}, received {s}')
    return float(_zeta_series(s, cutoff, tolerance).value)


def zeta_complex(s, tolerance=DEFAULT_TOLERANCE):
    s = complex(s)
    if not cmath.isfinite(s):
        raise ValueError(f'zeta_complex expects a finite argument, received {s}')
    if abs(s - 1) <= POLE_MARGIN:
        raise PoleError(f'zeta_complex argument {s} is at the pole s = 1')
    if s.real <= 0:
        raise ValueError(f'zeta_complex is supported for Re(s) > 0, received {s}')
    cutoff = max(10, int(abs(s.imag) / 2) + 20)
    return complex(_zeta_series(s, cutoff, tolerance).value)


def _offset_context(y):
    # private context, the batch collapse evaluates from several threads
    context = mpmath.MPContext()
    context.dps = INVERSE_DPS + max(0, int(math.log10(y)))
    return context


def zeta_offset(offset, context=None):
    """zeta(1 + offset) for offset > 0, with 1 + offset held exactly at raised precision."""
    offset = float(offset)
    if not offset > 0:
        raise PoleError(f'zeta_offset requires offset > 0, received {offset}')
    context = context or _offset_context(1 / offset)
    return float(context.zeta(1 + context.mpf(offset)))


@lru_cache(maxsize=4096)
def zeta_inverse_offset(y):
    """t - 1 for the unique t > 1 with zeta(t) = y.

    Solved in the offset so that t* near the pole keeps full relative precision.
    1/eps < zeta(1 + eps) < 1/eps + 1 brackets the root in [1/y, 1/(y - 1)].
    """
    y = float(y)
    if not (y > 1 and math.isfinite(y)):
        raise ValueError(f'zeta_inverse requires finite y > 1, received {y}')
    context = _offset_context(y)
    target = context.mpf(y)

    def residual(offset):
        return float(context.zeta(1 + context.mpf(offset)) - target)

    try:
        return optimize.brentq(residual, 1 / y, 1 / (y - 1), xtol=1e-300, maxiter=500)
    except (RuntimeError, ValueError) as e:
        raise ConvergenceError(f'zeta_inverse failed for y = {y}: {e}') from e


def zeta_inverse(y):
    """The unique t > 1 with zeta(t) = y."""
    return 1.0 + zeta_inverse_offset(y)


def riemann_siegel_theta(t):
    t = float(t)
    return float(np.imag(special.loggamma(complex(0.25, t / 2)))) - t / 2 * math.log(math.pi)


def riemann_siegel_z(t):
    """Z(t) = exp(i theta(t)) zeta(1/2 + i t), real on the critical line."""
    t = float(t)
    value = cmath.exp(1j * riemann_siegel_theta(t)) * zeta_complex(complex(0.5, t))
    return value.real


def zero_count_estimate(T):
    """Smooth part of the zero counting function up to height T."""
    if T <= 0:
        raise ValueError(f'zero_count_estimate expects T > 0, received {T}')
    return T / (2 * math.pi) * math.log(T / (2 * math.pi * math.e)) + 7 / 8


@dataclass(frozen=True)
class ZetaZeroTable:
    """Imaginary parts of critical-line zeros, increasing, each bracketed within precision."""

    zeros: tuple
    precision: float

    def __post_init__(self):
        zeros = tuple(float(z) for z in self.zeros)
        object.__setattr__(self, 'zeros', zeros)
        if self.precision <= 0:
            raise ValueError(f'zero table precision must be positive, received {self.precision}')
        if zeros and not 14 < zeros[0] < 15:
            raise ValueError(f'first zero must lie in (14, 15), received {zeros[0]}')
        if any(b <= a for a, b in zip(zeros, zeros[1:])):
            raise ValueError('zero table must be strictly increasing')

    @property
    def count(self):
        return len(self.zeros)

    def __len__(self):
        return len(self.zeros)

    def __getitem__(self, index):
        return self.zeros[index]

    def to_text(self):
        lines = [f'{ZERO_TABLE_HEADER}{self.precision:g}']
        lines.extend(f'{z:.12f}' for z in self.zeros)
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_text(cls, text):
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines or not lines[0].startswith(ZERO_TABLE_HEADER):
            raise ValueError('zero table text is missing the "# omqm-zeros v1" header')
        try:
            precision = float(lines[0][len(ZERO_TABLE_HEADER):])
            zeros = [float(line) for line in lines[1:]]
        except ValueError as e:
            raise ValueError(f'malformed zero table: {e}') from e
        return cls(tuple(zeros), precision)


def _evaluate_z(ts):
    return [riemann_siegel_z(t) for t in ts]


def find_zeros(t_max, precision=MIN_ZERO_PRECISION, step=SCAN_STEP, workers=None):
    """Critical-line zeros in (0, t_max] by sign changes of Z(t), refined by bisection."""
    if not 0 < t_max <= MAX_ZERO_HEIGHT:
        raise ValueError(f'find_zeros supports 0 < t_max <= {MAX_ZERO_HEIGHT}, received {t_max}')
    if precision < MIN_ZERO_PRECISION:
        raise ValueError(f'find_zeros precision must be >= {MIN_ZERO_PRECISION}, received {precision}')
    start_time = time.time()
    grid = np.arange(0.0, t_max, step).tolist()
    grid.append(float(t_max))

    workers = worker_count(workers)
    chunk_size = max(1, len(grid) // workers + 1)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(_evaluate_z, chunk) for chunk in chunks(grid, chunk_size)]
        values = [value for future in futures for value in future.result()]

    zeros = []
    for (a, za), (b, zb) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        if zb == 0 and b > 0:
            zeros.append(b)
        elif za * zb < 0:
            try:
                zeros.append(optimize.bisect(riemann_siegel_z, a, b, xtol=precision / 4))
            except (RuntimeError, ValueError) as e:
                raise EvaluationError(f'zero refinement failed in [{a}, {b}]: {e}') from e
    log_elapsed_time(start_time, f'Zero scan to {t_max}', zero_count=len(zeros))
    return ZetaZeroTable(tuple(zeros), precision)


def _lambda_table(Q, table):
    if table is not None and table.bound >= Q:
        return table
    return arithmetic_table(max(Q, DEFAULT_TABLE_BOUND))


def log_derivative_series(t, cutoff, table=None):
    """-sum over q <= cutoff of Lambda(q) / q**t, with the tail estimate cutoff**(1-t) / (t-1)."""
    t = float(t)
    if t <= 1:
        raise ValueError(f'log_derivative_series requires t > 1, received {t}')
    if cutoff < 1:
        raise ValueError(f'cutoff must be >= 1, received {cutoff}')
    table = _lambda_table(cutoff, table)
    lam = table.lambda_log[:cutoff + 1]
    q = np.nonzero(lam)[0]
    value = -float(np.sum(lam[q] * np.power(q.astype(np.float64), -t)))
    return SeriesValue(value, cutoff ** (1 - t) / (t - 1))


def log_derivative_numeric(t, h=1e-5):
    """Central difference of ln zeta at t."""
    if t - h <= 1 + POLE_MARGIN:
        raise PoleError(f'log_derivative_numeric stencil at {t} +- {h} reaches the pole')
    return (math.log(zeta_real(t + h)) - math.log(zeta_real(t - h))) / (2 * h)


def prime_power_zeta_sum(t, cutoff, table=None):
    """Sum of q**-t over prime powers q = p**m <= cutoff."""
    t = float(t)
    if t <= 1:
        raise ValueError(f'prime_power_zeta_sum requires t > 1, received {t}')
    if cutoff < 2:
        raise ValueError(f'cutoff must be >= 2, received {cutoff}')
    table = _lambda_table(cutoff, table)
    q = np.nonzero(table.lambda_log[:cutoff + 1])[0]
    value = float(np.sum(np.power(q.astype(np.float64), -t)))
    return SeriesValue(value, cutoff ** (1 - t) / ((t - 1) * math.log(cutoff)))


def om_mass(q, constants=None):
    """m(q) = s~ Lambda(q)."""
    constants = constants or OMConstants()
    return constants.s_tilde * von_mangoldt(q)


def om_energy_sq(q, j, zeros, constants=None):
    """Squared energy over (4 pi^2)^2 for prime power q paired with the j-th zero (1-based).

    s~^2 sigma_j ln(q) q + m(q) + 2 m(q)^2, with m evaluated at the same q.
    """
    constants = constants or OMConstants()
    if von_mangoldt(q) == 0:
        raise NotPrimePowerError(f'om_energy_sq requires a prime power, received {q}')
    if not 1 <= j <= len(zeros):
        raise ValueError(f'zero index {j} outside table of {len(zeros)} zeros')
    sigma = zeros[j - 1]
    s = constants.s_tilde
    m = om_mass(q, constants)
    value = s * s * sigma * math.log(q) * q + m + 2 * m * m
    Logs.debug('Evaluated OM energy', extra={'q': q, 'zero_index': j, 'energy_sq': str(value)})
    return value
