import cmath
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from numbers import Integral
from typing import Optional

from nanome.util import Logs

from .collapse import build_mixed_state
from .numtheory import factorize_by_trial_division
from .omcore import OMConstants, OMScale, collapse_index
from .utils import chunks, to_jsonable, worker_count


__all__ = [
    'EPRSetup', 'EPROutcome', 'VolumeLedger', 'ToyCurve', 'KeyShare',
    'epr_collapse', 'entanglement_volume', 'volume_ledger', 'ledger_from_setup', 'epr_batch', 'key_exchange']


def _integer(value, name):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise TypeError(f'{name} expected an integer, received {type(value)}')
    return int(value)


@dataclass(frozen=True)
class EPRSetup:
    """Two particles at scales l1_a and l1_b sharing an entanglement box of scale b."""

    l1_a: int
    l1_b: int
    b: int
    n: int
    crossing_parity: int = 1

    def __post_init__(self):
        for name in ('l1_a', 'l1_b', 'b', 'n', 'crossing_parity'):
            object.__setattr__(self, name, _integer(getattr(self, name), name))
        if self.n < 1:
            raise ValueError(f'base size n must be >= 1, received {self.n}')
        if self.b < 0:
            raise ValueError(f'box scale b must be >= 0, received {self.b}')
        if self.b > min(self.l1_a, self.l1_b):
            raise ValueError(f'box scale b = {self.b} exceeds min(l1_a, l1_b) = {min(self.l1_a, self.l1_b)}')
        if self.crossing_parity not in (1, -1):
            raise ValueError(f'crossing_parity must be +1 or -1, received {self.crossing_parity}')

    @property
    def asymmetric(self):
        return self.l1_a != self.l1_b

    @classmethod
    def from_dict(cls, data):
        return cls(data['l1a'], data['l1b'], data.get('b', 0), data['n'], data.get('parity', 1))


@dataclass(frozen=True)
class EPROutcome:
    setup: EPRSetup
    k_a: int
    k_b: int
    orient_a: int
    orient_b: int
    spin_a: Optional[float] = None
    spin_b: Optional[float] = None

    def to_dict(self):
        return {
            'l1a': self.setup.l1_a, 'l1b': self.setup.l1_b, 'b': self.setup.b, 'n': self.setup.n,
            'parity': self.setup.crossing_parity, 'asymmetric': self.setup.asymmetric,
            'k_a': self.k_a, 'k_b': self.k_b, 'orient_a': self.orient_a, 'orient_b': self.orient_b,
            'spin_a': self.spin_a, 'spin_b': self.spin_b,
        }


def _spin(k, orientation):
    return (0.5 if k == 1 else -0.5) * orientation


def epr_collapse(setup):
    """Both particles collapse past the box, with opposite key orientations."""
    k_a = collapse_index(setup.l1_a - setup.b, setup.n)
    k_b = collapse_index(setup.l1_b - setup.b, setup.n)
    orient_a = setup.crossing_parity
    orient_b = -setup.crossing_parity
    if setup.asymmetric:
        Logs.debug('Asymmetric EPR setup', extra={'l1_a': setup.l1_a, 'l1_b': setup.l1_b})
    if setup.n == 2:
        return EPROutcome(setup, k_a, k_b, orient_a, orient_b, _spin(k_a, orient_a), _spin(k_b, orient_b))
    return EPROutcome(setup, k_a, k_b, orient_a, orient_b)


@dataclass(frozen=True)
class VolumeLedger:
    vol_s1: complex
    vol_s2: complex
    vol_q1: complex
    vol_q2: complex
    phi_genus2: complex
    vol_e: complex
    branch: str = 'principal'

    @property
    def residual(self):
        """Relative gap between the product of exponentials and phi_genus2."""
        product = cmath.exp(self.vol_e)
        for volume in (self.vol_s1, self.vol_s2, self.vol_q1, self.vol_q2):
            product *= cmath.exp(volume)
        return abs(product - self.phi_genus2) / max(1.0, abs(self.phi_genus2))

    def to_dict(self):
        return to_jsonable({
            'vol_s1': self.vol_s1, 'vol_s2': self.vol_s2, 'vol_q1': self.vol_q1, 'vol_q2': self.vol_q2,
            'phi_genus2': self.phi_genus2, 'vol_e': self.vol_e, 'branch': self.branch, 'residual': self.residual,
        })


def entanglement_volume(vol_s1, vol_s2, vol_q1, vol_q2, phi_genus2):
    """ln(phi_genus2) on the principal branch, less the four component volumes."""
    volumes = [complex(v) for v in (vol_s1, vol_s2, vol_q1, vol_q2)]
    if not all(cmath.isfinite(v) for v in volumes):
        raise ValueError(f'component volumes must be finite, received {volumes}')
    phi_genus2 = complex(phi_genus2)
    if phi_genus2 == 0 or not cmath.isfinite(phi_genus2):
        raise ValueError(f'phi_genus2 must be finite and non-zero, received {phi_genus2}')
    return cmath.log(phi_genus2) - sum(volumes)


def volume_ledger(vol_s1, vol_s2, vol_q1, vol_q2, phi_genus2):
    vol_e = entanglement_volume(vol_s1, vol_s2, vol_q1, vol_q2, phi_genus2)
    return VolumeLedger(
        complex(vol_s1), complex(vol_s2), complex(vol_q1), complex(vol_q2), complex(phi_genus2), vol_e)


def ledger_from_setup(setup, phi_genus2, constants=None):
    """Ledger built from the mixed states of both particles at l1 - b."""
    constants = constants or OMConstants()
    if min(setup.l1_a, setup.l1_b) - setup.b < 1:
        raise ValueError('volume ledger needs l1 - b >= 1 for both particles')
    state_a = build_mixed_state(OMScale(setup.l1_a - setup.b, setup.n), constants)
    state_b = build_mixed_state(OMScale(setup.l1_b - setup.b, setup.n), constants)
    return volume_ledger(state_a.vol_R, state_b.vol_R, 1j * state_a.vol_H, 1j * state_b.vol_H, phi_genus2)


def _run_lines(numbered_lines):
    results = []
    for number, line in numbered_lines:
        try:
            record = epr_collapse(EPRSetup.from_dict(json.loads(line))).to_dict()
        except (KeyError, TypeError, ValueError) as e:
            Logs.warning(f'EPR batch line {number} skipped: {e}', extra={'line_number': number})
            results.append({'line': number, 'error': f'{type(e).__name__}: {e}'})
            continue
        record.update(line=number, error=None)
        results.append(record)
    return results


def epr_batch(lines, workers=None):
    """Collapse every JSON-lines scenario, keys l1a, l1b, b, n and parity.

    A line that fails to parse or validate becomes a record holding only its
    line number and error, the remaining lines still run.
    """
    numbered = [(i, line) for i, line in enumerate(lines, start=1) if line.strip()]
    workers = worker_count(workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_run_lines, chunk)
            for chunk in chunks(numbered, max(1, len(numbered) // workers + 1))]
        return [record for future in futures for record in future.result()]


@dataclass(frozen=True)
class ToyCurve:
    """y^2 = x^3 + a x + b over GF(p). The point at infinity is None."""

    p: int = 1019
    a: int = 2
    b: int = 3
    generator: tuple = field(init=False, compare=False)

    def __post_init__(self):
        if self.p < 5 or factorize_by_trial_division(self.p) != {self.p: 1}:
            raise ValueError(f'curve modulus must be an odd prime, received {self.p}')
        if self.p % 4 != 3:
            raise ValueError(f'curve modulus must be 3 mod 4 for square roots, received {self.p}')
        if (4 * self.a ** 3 + 27 * self.b ** 2) % self.p == 0:
            raise ValueError('curve is singular')
        object.__setattr__(self, 'generator', self._find_generator())

    def _find_generator(self):
        for x in range(self.p):
            rhs = (x ** 3 + self.a * x + self.b) % self.p
            y = pow(rhs, (self.p + 1) // 4, self.p)
            if y != 0 and y * y % self.p == rhs:
                return (x, y)
        raise ValueError('curve has no affine point with y != 0')

    def contains(self, point):
        if point is None:
            return True
        x, y = point
        return (y * y - (x ** 3 + self.a * x + self.b)) % self.p == 0

    def add(self, P, Q):
        if P is None:
            return Q
        if Q is None:
            return P
        p = self.p
        if P[0] == Q[0] and (P[1] + Q[1]) % p == 0:
            return None
        if P == Q:
            slope = (3 * P[0] * P[0] + self.a) * pow(2 * P[1], -1, p) % p
        else:
            slope = (Q[1] - P[1]) * pow(Q[0] - P[0], -1, p) % p
        x = (slope * slope - P[0] - Q[0]) % p
        y = (slope * (P[0] - x) - P[1]) % p
        return (x, y)

    def multiply(self, scalar, point):
        result = None
        addend = point
        while scalar:
            if scalar & 1:
                result = self.add(result, addend)
            addend = self.add(addend, addend)
            scalar >>= 1
        return result


@dataclass(frozen=True)
class KeyShare:
    private_a: int
    private_b: int
    public_a: Optional[tuple]
    public_b: Optional[tuple]
    shared_a: Optional[tuple]
    shared_b: Optional[tuple]

    @property
    def agreed(self):
        return self.shared_a == self.shared_b

    def to_dict(self):
        return {
            'public_a': self.public_a, 'public_b': self.public_b,
            'shared_a': self.shared_a, 'shared_b': self.shared_b, 'agreed': self.agreed}


def key_exchange(setup, curve=None):
    """Each particle's key opens the other's cylinder: scalars come from the shifted scales."""
    curve = curve or ToyCurve()
    private_a = 1 + (setup.l1_a - setup.b) % (curve.p - 1)
    private_b = 1 + (setup.l1_b - setup.b) % (curve.p - 1)
    public_a = curve.multiply(private_a, curve.generator)
    public_b = curve.multiply(private_b, curve.generator)
    for public in (public_a, public_b):
        if not curve.contains(public):
            raise ValueError(f'public key {public} is not on the curve')
    return KeyShare(
        private_a, private_b, public_a, public_b,
        curve.multiply(private_a, public_b), curve.multiply(private_b, public_a))
