import cmath
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np
from nanome.util import Logs
from scipy import special

from .models import ClaimRecord, SeriesValue
from .numtheory import divisor_sigma
from .omcore import EvaluationError, OMConstants, as_complex, reduce_scale
from .utils import chunks, log_elapsed_time, worker_count
from .zeta import zeta_real


__all__ = [
    'LatticePoleError', 'Lattice', 'WeierstrassInvariants', 'WeierstrassPoint',
    'eisenstein_lattice_sum', 'invariants_q_expansion', 'lattice_invariants', 'laurent_coefficients',
    'wp_evaluate', 'wp', 'wp_prime', 'ode_residual', 'wp_grid', 'mixed_state_fourier', 'identity_ledger']


METHOD_LATTICE_SUM = 'lattice-sum'
METHOD_Q_EXPANSION = 'q-expansion'
METHODS = (METHOD_LATTICE_SUM, METHOD_Q_EXPANSION)

MIN_RADIUS = 50
MIN_Q_CUTOFF = 20
MIN_TAU_IMAG = 0.2
POLE_DISTANCE = 1e-6
# Largest |z| / shortest period for which the Laurent series is used directly
MAX_SERIES_RATIO = 0.8
MAX_LAURENT_TERMS = 400
# Polynomial orders in 1/r for the shell-sum tail model
_TAIL_POWERS = (0, 1, 2, 4, 6)
CROSS_CHECK_TAUS = (1j, 2j, cmath.exp(1j * math.pi / 3) + 0.1j)


class LatticePoleError(EvaluationError, ValueError):
    pass


@dataclass(frozen=True)
class Lattice:
    """Period lattice spanned by omega1 and omega2 with Im(omega2 / omega1) > 0."""

    omega1: complex
    omega2: complex

    def __post_init__(self):
        omega1 = complex(self.omega1)
        omega2 = complex(self.omega2)
        object.__setattr__(self, 'omega1', omega1)
        object.__setattr__(self, 'omega2', omega2)
        if omega1 == 0 or omega2 == 0:
            raise ValueError('lattice periods must be non-zero')
        tau = omega2 / omega1
        if abs(tau.imag) <= 1e-12 * abs(tau):
            raise ValueError(f'lattice periods {omega1} and {omega2} are collinear')
        if tau.imag <= 0:
            raise ValueError(f'lattice requires Im(omega2 / omega1) > 0, received tau = {tau}')

    @classmethod
    def square(cls):
        return cls(1, 1j)

    @classmethod
    def hexagonal(cls):
        return cls(1, cmath.exp(1j * math.pi / 3))

    @classmethod
    def from_tau(cls, tau):
        return cls(1, complex(tau))

    @property
    def tau(self):
        return self.omega2 / self.omega1

    def reduced(self):
        """Lagrange-Gauss reduced basis of the same lattice with the same orientation."""
        w1, w2 = self.omega1, self.omega2
        for _ in range(1000):
            if abs(w2) < abs(w1):
                w1, w2 = w2, -w1
            m = round((w2 * w1.conjugate()).real / abs(w1) ** 2)
            if m == 0:
                break
            w2 -= m * w1
        return Lattice(w1, w2)

    @property
    def shortest_period(self):
        return abs(self.reduced().omega1)

    def coordinates(self, z):
        """Real (a, b) with z = a * omega1 + b * omega2."""
        z = as_complex(z)
        basis = np.array([[self.omega1.real, self.omega2.real], [self.omega1.imag, self.omega2.imag]])
        a, b = np.linalg.solve(basis, np.array([z.real, z.imag]))
        return float(a), float(b)

    def point(self, m, n):
        return m * self.omega1 + n * self.omega2

    def reduce_point(self, z):
        """Return (w, lam) with z = w + lam, lam the lattice point nearest to z."""
        z = as_complex(z)
        a, b = self.coordinates(z)
        a0, b0 = round(a), round(b)
        candidates = [self.point(a0 + i, b0 + j) for i in (-1, 0, 1) for j in (-1, 0, 1)]
        lam = min(candidates, key=lambda c: abs(z - c))
        return z - lam, lam


@dataclass(frozen=True)
class WeierstrassInvariants:
    g2: complex
    g3: complex
    method: str
    truncation_bound: float = 0.0

    @property
    def G4(self):
        return self.g2 / 60

    @property
    def G6(self):
        return self.g3 / 140

    def scaled(self, factor):
        """Invariants of the lattice factor * L."""
        return WeierstrassInvariants(
            self.g2 * factor ** -4, self.g3 * factor ** -6, self.method,
            self.truncation_bound * max(abs(factor) ** -4, abs(factor) ** -6))

    def to_dict(self):
        return {'g2': self.g2, 'g3': self.g3, 'method': self.method, 'truncation_bound': self.truncation_bound}


@dataclass(frozen=True)
class WeierstrassPoint:
    z: complex
    value: complex
    derivative: complex
    bound: float


def eisenstein_lattice_sum(lattice, k, radius=MIN_RADIUS, extrapolate=True):
    """G_k summed over square coefficient shells max(|m|, |n|) <= radius.

    With extrapolate, the remaining shells are estimated from a fit of the last
    shells to r**(1-k) * (c0 + c1/r + c2/r**2 + c4/r**4 + c6/r**6) and summed
    with Hurwitz zeta values.
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 4 or k % 2:
        raise ValueError(f'Eisenstein sums need an even weight k >= 4, received {k}')
    if radius < MIN_RADIUS:
        raise ValueError(f'lattice sum radius must be >= {MIN_RADIUS}, received {radius}')
    reduced = lattice.reduced()
    coefficient_range = np.arange(-radius, radius + 1)
    m, n = np.meshgrid(coefficient_range, coefficient_range, indexing='ij')
    shell = np.maximum(np.abs(m), np.abs(n)).ravel()
    points = (m * reduced.omega1 + n * reduced.omega2).ravel()
    nonzero = shell > 0
    values = np.zeros(points.shape, dtype=np.complex128)
    values[nonzero] = points[nonzero] ** (-k)
    shell_sums = (np.bincount(shell, weights=values.real, minlength=radius + 1)
                  + 1j * np.bincount(shell, weights=values.imag, minlength=radius + 1))
    partial = complex(np.sum(shell_sums[1:]))

    r = np.arange(radius // 2, radius + 1, dtype=np.float64)
    scaled = shell_sums[radius // 2:] * r ** (k - 1)
    u = radius / r
    design = np.stack([u ** p for p in _TAIL_POWERS], axis=1).astype(np.complex128)
    fit, _, _, _ = np.linalg.lstsq(design, scaled, rcond=None)
    residual = float(np.max(np.abs(design @ fit - scaled)))
    tail = sum(
        complex(c) * radius ** p * float(special.zeta(k - 1 + p, radius + 1))
        for c, p in zip(fit, _TAIL_POWERS))
    tail_weight = float(special.zeta(k - 1, radius + 1))
    if extrapolate:
        return SeriesValue(partial + tail, residual * tail_weight + 1e-15 * abs(partial))
    return SeriesValue(partial, abs(tail))


def invariants_q_expansion(tau, cutoff=40):
    """g2 and g3 of the lattice (1, tau) from the sigma_3 / sigma_5 q-series."""
    tau = complex(tau)
    if tau.imag <= MIN_TAU_IMAG:
        raise ValueError(f'q-expansion needs Im(tau) > {MIN_TAU_IMAG}, received {tau}')
    if cutoff < MIN_Q_CUTOFF:
        raise ValueError(f'q-expansion cutoff must be >= {MIN_Q_CUTOFF}, received {cutoff}')
    q = cmath.exp(2j * math.pi * tau)
    k = np.arange(1, cutoff + 1)
    q_powers = q ** k
    sigma3 = np.array([float(divisor_sigma(3, int(j))) for j in k])
    sigma5 = np.array([float(divisor_sigma(5, int(j))) for j in k])
    g2 = 4 / 3 * math.pi ** 4 * (1 + 240 * complex(np.sum(sigma3 * q_powers)))
    g3 = 8 / 27 * math.pi ** 6 * (1 - 504 * complex(np.sum(sigma5 * q_powers)))

    # sigma_a(j) <= zeta(a) j**a bounds the dropped terms
    rest = np.arange(cutoff + 1, cutoff + 400, dtype=np.float64)
    weights = np.abs(q) ** rest
    tail3 = 4 / 3 * math.pi ** 4 * 240 * float(special.zeta(3)) * float(np.sum(rest ** 3 * weights))
    tail5 = 8 / 27 * math.pi ** 6 * 504 * float(special.zeta(5)) * float(np.sum(rest ** 5 * weights))
    return WeierstrassInvariants(g2, g3, METHOD_Q_EXPANSION, max(tail3, tail5))


@lru_cache(maxsize=64)
def lattice_invariants(lattice, method=METHOD_Q_EXPANSION, radius=MIN_RADIUS, cutoff=40):
    if method not in METHODS:
        raise ValueError(f'unknown invariants method {method!r}, expected one of {METHODS}')
    reduced = lattice.reduced()
    if method == METHOD_Q_EXPANSION:
        return invariants_q_expansion(reduced.tau, cutoff).scaled(reduced.omega1)
    G4 = eisenstein_lattice_sum(reduced, 4, radius)
    G6 = eisenstein_lattice_sum(reduced, 6, radius)
    return WeierstrassInvariants(
        60 * G4.value, 140 * G6.value, METHOD_LATTICE_SUM, max(60 * G4.tail_bound, 140 * G6.tail_bound))


@lru_cache(maxsize=64)
def laurent_coefficients(g2, g3, count=MAX_LAURENT_TERMS):
    """c_2 .. c_(count+1) of wp(z) = 1/z**2 + sum c_k z**(2k-2)."""
    c = {2: complex(g2) / 20, 3: complex(g3) / 28}
    for k in range(4, count + 2):
        c[k] = 3 / ((2 * k + 1) * (k - 3)) * sum(c[m] * c[k - m] for m in range(2, k - 1))
    return np.array([c[k] for k in range(2, count + 2)], dtype=np.complex128)


def _series_terms(ratio):
    if ratio <= 0:
        return 10
    return int(min(MAX_LAURENT_TERMS, max(10, math.ceil(44 / (-2 * math.log(ratio))) + 8)))


def _laurent(w, coefficients, ratio):
    count = _series_terms(ratio)
    c = coefficients[:count - 1]
    w2 = w * w
    powers = w2 ** np.arange(1, count)
    terms = c * powers
    value = 1 / w2 + complex(np.sum(terms))
    derivative = -2 / (w2 * w) + complex(np.sum(2 * np.arange(1, count) * terms)) / w
    bound = abs(terms[-1]) / max(1e-3, 1 - ratio ** 2)
    return value, derivative, bound


def wp_evaluate(z, lattice, method=METHOD_Q_EXPANSION, max_ratio=MAX_SERIES_RATIO):
    """wp and wp' at z with a truncation bound.

    z is moved to the lattice point nearest the origin first. Points too far out
    for the series are halved until they fit, and the result is doubled back.
    """
    z = as_complex(z)
    reduced = lattice.reduced()
    omega1 = reduced.omega1
    w, _ = reduced.reduce_point(z)
    if abs(w) < POLE_DISTANCE * abs(omega1):
        raise LatticePoleError(f'z = {z} lies on a lattice point of {lattice}')

    # Normalise to the lattice (1, tau) so coefficients stay O(1)
    invariants = lattice_invariants(lattice, method)
    g2 = invariants.g2 * omega1 ** 4
    g3 = invariants.g3 * omega1 ** 6
    coefficients = laurent_coefficients(g2, g3)
    w = w / omega1
    ratio = abs(w)

    doublings = 0
    while ratio / 2 ** doublings > max_ratio:
        doublings += 1
    value, derivative, bound = _laurent(w / 2 ** doublings, coefficients, ratio / 2 ** doublings)
    for _ in range(doublings):
        second = 6 * value * value - g2 / 2
        if derivative == 0:
            raise EvaluationError(f'duplication hit a half period while evaluating wp at {z}')
        slope = second / derivative
        value, derivative = (
            slope * slope / 4 - 2 * value,
            3 * value * slope - slope ** 3 / 4 - derivative)
        bound *= 4
    return WeierstrassPoint(z, value / omega1 ** 2, derivative / omega1 ** 3, bound / abs(omega1) ** 2)


def wp(z, lattice, method=METHOD_Q_EXPANSION):
    return wp_evaluate(z, lattice, method).value


def wp_prime(z, lattice, method=METHOD_Q_EXPANSION):
    return wp_evaluate(z, lattice, method).derivative


def ode_residual(point, invariants):
    """|wp'^2 - (4 wp^3 - g2 wp - g3)| relative to 1 + |wp|^3."""
    p = point.value
    residual = point.derivative ** 2 - (4 * p ** 3 - invariants.g2 * p - invariants.g3)
    return abs(residual) / (1 + abs(p) ** 3)


def _grid_rows(lattice, invariants, rows, cols, row_indices):
    result = []
    for j in row_indices:
        row = []
        for i in range(cols):
            z = (i + 0.5) / cols * lattice.omega1 + (j + 0.5) / rows * lattice.omega2
            point = wp_evaluate(z, lattice, invariants.method)
            row.append((point, ode_residual(point, invariants)))
        result.append(row)
    return result


def wp_grid(lattice, rows, cols=None, method=METHOD_Q_EXPANSION, workers=None):
    """wp and the ODE residual at cell centres of the fundamental parallelogram."""
    cols = cols or rows
    if rows < 1 or cols < 1:
        raise ValueError(f'grid needs at least one row and column, received {rows}x{cols}')
    start_time = time.time()
    invariants = lattice_invariants(lattice, method)
    workers = worker_count(workers)
    row_chunks = list(chunks(list(range(rows)), max(1, rows // workers)))
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_grid_rows, lattice, invariants, rows, cols, indices)
            for indices in row_chunks]
        grid = [row for future in futures for row in future.result()]
    log_elapsed_time(start_time, f'Weierstrass grid {rows}x{cols}', rows=rows, cols=cols)
    return grid


def mixed_state_fourier(z, scale, cutoff=10, constants=None):
    """1/z^2 + (A+B) + z^2 sum_k (240 A s3(k) - 504 z^2 B s5(k)) exp(2 k pi i l1|n)."""
    constants = constants or OMConstants()
    z = as_complex(z)
    if z == 0:
        raise LatticePoleError('mixed_state_fourier has a pole at z = 0')
    if cutoff < 0:
        raise ValueError(f'cutoff must be >= 0, received {cutoff}')
    reduced = reduce_scale(scale.l1, scale.n)
    A, B = constants.A, constants.B
    total = 0j
    for k in range(1, cutoff + 1):
        # reduced is an integer, so only the fractional part of k * reduced matters
        phase = cmath.exp(2j * math.pi * math.fmod(k * reduced, 1.0))
        total += (240 * A * divisor_sigma(3, k) - 504 * z * z * B * divisor_sigma(5, k)) * phase
    return 1 / (z * z) + (A + B) + z * z * total


def _quartic_sextic_claim(constants):
    with mpmath.workdps(50):
        A = mpmath.pi ** 4 / 15
        B = 2 * mpmath.pi ** 6 / 189
        difference = max(
            abs(constants.A - A) / A,
            abs(constants.B - B) / B)
        details = {'A': mpmath.nstr(A, 30), 'B': mpmath.nstr(B, 30)}
        difference = float(difference)
    return ClaimRecord.evaluate(
        'quartic-sextic-constants', difference, 0.0, 1e-12,
        'relative gap between double-precision products and 50-digit closed forms', details)


def _sample_points(lattice, count, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(0.05, 0.95, size=(2, count))
    return [complex(x * lattice.omega1 + y * lattice.omega2) for x, y in zip(a, b)]


def identity_ledger(constants=None):
    """Claim records for the elliptic identities."""
    constants = constants or OMConstants()
    A, B = constants.A, constants.B
    records = []

    records.append(ClaimRecord.evaluate(
        'eq67', 4 * 240 * A - 504 * B, 8, 1e-9,
        'asserted combination 4*240*A - 504*B of the quartic and sextic constants'))

    gamma = float(np.euler_gamma)
    per_k = {
        str(k): 240 * A * divisor_sigma(3, k) - 504 * zeta_real(k) ** 2 * B * divisor_sigma(5, k)
        for k in range(2, 13)}
    records.append(ClaimRecord.evaluate(
        'eq66', 240 * A - 504 * gamma ** 2 * B, None, 0.0,
        'k = 1 with zeta(1) read as the Euler-Mascheroni constant; magnitudes only',
        {'per_k': per_k}))

    square = Lattice.square()
    invariants = lattice_invariants(square)
    point = wp_evaluate(complex(0.3, 0.2), square)
    printed = point.derivative - (4 * point.value ** 3 - 2 * invariants.g2 * point.value - invariants.g3)
    records.append(ClaimRecord.evaluate(
        'eq57-printed', abs(printed), 0.0, 1e-8,
        "wp' against 4 wp^3 - 2 g2 wp - g3 at z = 0.3+0.2i on the square lattice"))

    worst = 0.0
    for lattice in (square, Lattice.hexagonal()):
        lattice_inv = lattice_invariants(lattice)
        for z in _sample_points(lattice, 20, seed=7):
            worst = max(worst, ode_residual(wp_evaluate(z, lattice), lattice_inv))
    records.append(ClaimRecord.evaluate(
        'weierstrass-ode-standard', worst, 0.0, 1e-8,
        "max relative residual of wp'^2 = 4 wp^3 - g2 wp - g3 on square and hexagonal lattices"))

    gaps = {}
    for tau in CROSS_CHECK_TAUS:
        lattice = Lattice.from_tau(tau)
        by_sum = lattice_invariants(lattice, METHOD_LATTICE_SUM)
        by_series = lattice_invariants(lattice, METHOD_Q_EXPANSION)
        scale = max(abs(by_series.G4), abs(by_series.G6))
        gaps[f'{tau.real:.6f}{tau.imag:+.6f}i'] = max(
            abs(by_sum.G4 - by_series.G4), abs(by_sum.G6 - by_series.G6)) / scale
    records.append(ClaimRecord.evaluate(
        'invariants-cross-method', max(gaps.values()), 0.0, 1e-6,
        'lattice-sum against q-expansion G4, G6 relative to the larger invariant',
        {'gap_by_tau': gaps}))

    records.append(_quartic_sextic_claim(constants))
    Logs.debug('Evaluated elliptic identity claims', extra={'claim_count': len(records)})
    return records
