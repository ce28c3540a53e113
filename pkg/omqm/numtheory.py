import math
import os
import struct
import time
from functools import cached_property, lru_cache, reduce

import numpy as np
from nanome.util import Logs

from .utils import atomic_write, log_elapsed_time


__all__ = [
    'ArithmeticTable', 'arithmetic_table', 'factorize', 'factorize_by_trial_division',
    'mobius', 'mertens', 'von_mangoldt', 'chebyshev_psi', 'divisor_sigma', 'divisors',
    'dirichlet_mobius_sum', 'om_wave_function', 'lcm_range']


DEFAULT_TABLE_BOUND = int(os.environ.get('OMQM_TABLE_BOUND', 0) or 100000)
MAX_TABLE_BOUND = 10 ** 7

TABLE_MAGIC = b'OMNT'
TABLE_VERSION = 1
# magic, format version (u32), bound (u64)
TABLE_HEADER = struct.Struct('<4sIQ')
MAX_SIGMA_POWER = 8


def _require_positive(k, name='k'):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
        raise TypeError(f'{name} expected an integer, received {type(k)}')
    if k < 1:
        raise ValueError(f'{name} must be a positive integer, received {k}')
    return int(k)


def _least_prime_factors(bound):
    lpf = np.zeros(bound + 1, dtype=np.int64)
    for p in range(2, math.isqrt(bound) + 1):
        if lpf[p] != 0:
            continue
        multiples = lpf[p * p::p]
        multiples[multiples == 0] = p
    indices = np.arange(bound + 1, dtype=np.int64)
    unmarked = lpf == 0
    lpf[unmarked] = indices[unmarked]
    lpf[0] = 0
    return lpf


class ArithmeticTable:
    """Sieved least prime factors, Mobius values and von Mangoldt values for 0..bound.

    Index 0 is a placeholder so that arrays can be read as table.mu[k].
    All arrays are read-only once built.
    """

    def __init__(self, bound, least_prime_factor=None, mu=None, lambda_log=None):
        bound = _require_positive(bound, 'bound')
        if bound > MAX_TABLE_BOUND:
            raise ValueError(f'table bound {bound} exceeds supported maximum {MAX_TABLE_BOUND}')
        self.bound = bound
        if least_prime_factor is None:
            start_time = time.time()
            least_prime_factor, mu, lambda_log = self._sieve(bound)
            log_elapsed_time(start_time, f'Sieve to {bound}', bound=bound)
        for name, array in (('least_prime_factor', least_prime_factor), ('mu', mu), ('lambda_log', lambda_log)):
            if array is None or len(array) != bound + 1:
                raise ValueError(f'{name} must have length {bound + 1}')
            array.flags.writeable = False
        self.least_prime_factor = least_prime_factor
        self.mu = mu
        self.lambda_log = lambda_log

    @staticmethod
    def _sieve(bound):
        lpf = _least_prime_factors(bound)
        indices = np.arange(bound + 1, dtype=np.int64)
        primes = indices[2:][lpf[2:] == indices[2:]]

        mu = np.ones(bound + 1, dtype=np.int8)
        mu[0] = 0
        lambda_log = np.zeros(bound + 1, dtype=np.float64)
        for p in primes.tolist():
            mu[p::p] *= -1
            square = p * p
            if square <= bound:
                mu[square::square] = 0
            log_p = math.log(p)
            power = p
            while power <= bound:
                lambda_log[power] = log_p
                power *= p
        return lpf, mu, lambda_log

    @cached_property
    def primes(self):
        indices = np.arange(self.bound + 1, dtype=np.int64)
        return indices[2:][self.least_prime_factor[2:] == indices[2:]]

    @cached_property
    def mertens_prefix(self):
        prefix = np.cumsum(self.mu, dtype=np.int64)
        prefix.flags.writeable = False
        return prefix

    @cached_property
    def psi_prefix(self):
        prefix = np.cumsum(self.lambda_log)
        prefix.flags.writeable = False
        return prefix

    def save(self, path):
        """Write the table in the OMNT binary layout (little-endian)."""
        header = TABLE_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, self.bound)
        payload = b''.join([
            header,
            self.least_prime_factor.astype('<i8').tobytes(),
            self.mu.astype('i1').tobytes(),
            self.lambda_log.astype('<f8').tobytes(),
        ])
        atomic_write(path, payload)
        Logs.debug(f'Saved arithmetic table to {path}', extra={'bound': self.bound, 'path': str(path)})
        return path

    @classmethod
    def load(cls, path):
        with open(path, 'rb') as f:
            data = f.read()
        if len(data) < TABLE_HEADER.size:
            raise ValueError(f'{path} is too short to hold an arithmetic table header')
        magic, version, bound = TABLE_HEADER.unpack_from(data, 0)
        if magic != TABLE_MAGIC:
            raise ValueError(f'{path} is not an arithmetic table, magic bytes {magic!r}')
        if version != TABLE_VERSION:
            raise ValueError(f'unsupported arithmetic table version {version}')
        if bound < 1 or bound > MAX_TABLE_BOUND:
            raise ValueError(f'arithmetic table bound {bound} out of range')
        size = bound + 1
        expected = TABLE_HEADER.size + size * (8 + 1 + 8)
        if len(data) != expected:
            raise ValueError(f'{path} holds {len(data)} bytes, expected {expected} for bound {bound}')
        offset = TABLE_HEADER.size
        lpf = np.frombuffer(data, dtype='<i8', count=size, offset=offset).astype(np.int64)
        offset += size * 8
        mu = np.frombuffer(data, dtype='i1', count=size, offset=offset).astype(np.int8)
        offset += size
        lambda_log = np.frombuffer(data, dtype='<f8', count=size, offset=offset).astype(np.float64)
        return cls(bound, lpf, mu, lambda_log)

    def __contains__(self, k):
        return 1 <= k <= self.bound

    def __repr__(self):
        return f'ArithmeticTable(bound={self.bound})'


@lru_cache(maxsize=8)
def arithmetic_table(bound=DEFAULT_TABLE_BOUND):
    """Shared table instance per bound."""
    return ArithmeticTable(bound)


def _table(table):
    return table if table is not None else arithmetic_table()


def factorize_by_trial_division(k):
    k = _require_positive(k)
    factors = {}
    while k % 2 == 0:
        factors[2] = factors.get(2, 0) + 1
        k //= 2
    p = 3
    while p * p <= k:
        while k % p == 0:
            factors[p] = factors.get(p, 0) + 1
            k //= p
        p += 2
    if k > 1:
        factors[k] = factors.get(k, 0) + 1
    return factors


def factorize(k, table=None):
    """Prime factorization of k as {prime: exponent}, ordered by prime."""
    k = _require_positive(k)
    table = _table(table)
    if k > table.bound:
        return factorize_by_trial_division(k)
    factors = {}
    lpf = table.least_prime_factor
    while k > 1:
        p = int(lpf[k])
        factors[p] = factors.get(p, 0) + 1
        k //= p
    return factors


def mobius(k, table=None):
    k = _require_positive(k)
    table = _table(table)
    if k <= table.bound:
        return int(table.mu[k])
    factors = factorize_by_trial_division(k)
    if any(exponent > 1 for exponent in factors.values()):
        return 0
    return -1 if len(factors) % 2 else 1


def mertens(k, table=None):
    """M(k), the running sum of mu up to k."""
    k = _require_positive(k)
    table = _table(table)
    if k <= table.bound:
        return int(table.mertens_prefix[k])
    total = int(table.mertens_prefix[table.bound])
    for j in range(table.bound + 1, k + 1):
        total += mobius(j, table)
    return total


def von_mangoldt(k, table=None):
    k = _require_positive(k)
    table = _table(table)
    if k <= table.bound:
        return float(table.lambda_log[k])
    factors = factorize_by_trial_division(k)
    if len(factors) == 1:
        return math.log(next(iter(factors)))
    return 0.0


def chebyshev_psi(N, table=None):
    N = _require_positive(N, 'N')
    table = _table(table)
    if N <= table.bound:
        return float(table.psi_prefix[N])
    tail = math.fsum(von_mangoldt(q, table) for q in range(table.bound + 1, N + 1))
    return float(table.psi_prefix[table.bound]) + tail


def divisor_sigma(a, k, table=None):
    """sigma_a(k), the exact sum of d**a over the divisors d of k."""
    if isinstance(a, bool) or not isinstance(a, int) or not 0 <= a <= MAX_SIGMA_POWER:
        raise ValueError(f'divisor_sigma power must be in 0..{MAX_SIGMA_POWER}, received {a}')
    total = 1
    for p, exponent in factorize(k, table).items():
        if a == 0:
            total *= exponent + 1
        else:
            total *= (p ** (a * (exponent + 1)) - 1) // (p ** a - 1)
    return total


def divisors(k, table=None):
    result = [1]
    for p, exponent in factorize(k, table).items():
        result = [d * p ** e for d in result for e in range(exponent + 1)]
    return sorted(result)


def dirichlet_mobius_sum(k, table=None):
    """Sum of mu(d) over d | k. Equal to 1 for k = 1 and 0 otherwise."""
    return sum(mobius(d, table) for d in divisors(k, table))


def om_wave_function(N, table=None):
    """Exact exp(psi(N)) as an integer: the product of p for every prime power p**r <= N."""
    N = _require_positive(N, 'N')
    if N <= _table(table).bound:
        primes = [int(p) for p in _table(table).primes if p <= N]
    else:
        primes = [p for p in range(2, N + 1) if factorize_by_trial_division(p) == {p: 1}]
    value = 1
    for p in primes:
        power = p
        while power <= N:
            value *= p
            power *= p
    return value


def lcm_range(N):
    """lcm(1, ..., N) with big integers."""
    N = _require_positive(N, 'N')
    return reduce(lambda a, b: a * b // math.gcd(a, b), range(1, N + 1), 1)
