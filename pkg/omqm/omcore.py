import cmath
import math
from dataclasses import dataclass, field
from numbers import Integral

import numpy as np


__all__ = [
    'EvaluationError', 'OMConstants', 'OMScale', 'ComplexPoint',
    'reduce_scale', 'collapse_index', 'collapse_indices', 'default_alpha_tilde', 'as_complex',
    'FRACTAL_DIMENSION', 'FEIGENBAUM_DELTA', 'REDUCTION_CONVENTION']


# Hausdorff dimension of the Rossler attractor taken as a fixed input.
FRACTAL_DIMENSION = 2.974283562752
FEIGENBAUM_DELTA = 4.669201609102990

# l1|n is read as l1 mod 2n. No other reduction is supported.
REDUCTION_CONVENTION = 'mod-2n'


class EvaluationError(Exception):
    """A numerical evaluation could not meet its accuracy or domain contract."""
    pass


def _require_integer(value, name):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise TypeError(f'{name} expected an integer, received {type(value)}')
    return int(value)


def default_alpha_tilde(D=FRACTAL_DIMENSION, delta=FEIGENBAUM_DELTA):
    """Unit minimal volume 1/(D*exp(sqrt(pi*delta)))."""
    return 1.0 / (D * math.exp(math.sqrt(math.pi * delta)))


@dataclass(frozen=True)
class OMConstants:
    """Fixed constants of the calculus.

    s_tilde_sign picks the branch of s~ = +-(i - 1). alpha_tilde defaults to the
    fine-structure reading 1/(D*exp(sqrt(pi*delta))).
    """

    s_tilde_sign: int = 1
    alpha_tilde: float = field(default_factory=default_alpha_tilde)

    def __post_init__(self):
        if self.s_tilde_sign not in (1, -1):
            raise ValueError(f's_tilde_sign must be +1 or -1, received {self.s_tilde_sign}')
        alpha = float(self.alpha_tilde)
        if not math.isfinite(alpha) or alpha <= 0:
            raise ValueError(f'alpha_tilde must be a positive real, received {self.alpha_tilde}')
        object.__setattr__(self, 'alpha_tilde', alpha)

    @classmethod
    def from_settings(cls, settings):
        """Build from the `constants` section of a resolved run configuration."""
        settings = settings or {}
        alpha = settings.get('alpha_tilde')
        if alpha is None:
            alpha = default_alpha_tilde(
                settings.get('D', FRACTAL_DIMENSION), settings.get('delta', FEIGENBAUM_DELTA))
        return cls(s_tilde_sign=settings.get('s_tilde_sign', 1), alpha_tilde=alpha)

    @property
    def p0_tilde(self):
        return 4 * math.pi ** 2

    @property
    def c_tilde(self):
        return -2j * math.pi

    @property
    def s_tilde(self):
        return self.s_tilde_sign * complex(-1, 1)

    @property
    def A(self):
        return 3 * 4 * math.pi ** 4 / (3 * 60)

    @property
    def B(self):
        return 5 * 8 * math.pi ** 6 / (27 * 140)


def _require_base(n):
    n = _require_integer(n, 'n')
    if n < 1:
        raise ValueError(f'base size n must be >= 1, received {n}')
    return n


def _reduce(l1, n):
    return l1 % (2 * n)


def reduce_scale(l1, n):
    """Return l1|n, read as l1 mod 2n."""
    l1 = _require_integer(l1, 'l1')
    n = _require_base(n)
    if l1 < 0:
        raise ValueError(f'scale l1 must be >= 0, received {l1}')
    return _reduce(l1, n)


def collapse_index(l1, n):
    """Deterministic outcome k* = floor((l1|n) / 2), always in 0..n-1."""
    return reduce_scale(l1, n) // 2


def collapse_indices(scales, n):
    """collapse_index over an integer array of scales."""
    scales = np.asarray(scales)
    if not np.issubdtype(scales.dtype, np.integer):
        raise TypeError(f'scales expected an integer array, received dtype {scales.dtype}')
    n = _require_base(n)
    if scales.size and scales.min() < 0:
        raise ValueError(f'scales must be >= 0, received {scales.min()}')
    return _reduce(scales, n) // 2


@dataclass(frozen=True)
class OMScale:
    """A measurement configuration: scale l1 in Planck lengths and base size n."""

    l1: int
    n: int
    convention: str = REDUCTION_CONVENTION

    def __post_init__(self):
        object.__setattr__(self, 'l1', _require_integer(self.l1, 'l1'))
        object.__setattr__(self, 'n', _require_integer(self.n, 'n'))
        if self.n < 1:
            raise ValueError(f'base size n must be >= 1, received {self.n}')
        if self.l1 < 0:
            raise ValueError(f'scale l1 must be >= 0, received {self.l1}')
        if self.convention != REDUCTION_CONVENTION:
            raise ValueError(
                f'unsupported reduction convention {self.convention!r}, only {REDUCTION_CONVENTION!r} is defined')

    @property
    def reduced(self):
        return reduce_scale(self.l1, self.n)

    @property
    def k_star(self):
        return collapse_index(self.l1, self.n)

    def shifted(self, b):
        """Scale seen past an entanglement box of size b."""
        return OMScale(self.l1 - b, self.n, self.convention)

    def to_dict(self):
        return {'l1': self.l1, 'n': self.n, 'convention': self.convention}


@dataclass(frozen=True)
class ComplexPoint:
    """z = u + i t, u along the petal and t along the loop coordinate."""

    u: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.t)):
            raise ValueError(f'ComplexPoint requires finite coordinates, received ({self.u}, {self.t})')

    @property
    def value(self):
        return complex(self.u, self.t)

    @classmethod
    def from_complex(cls, z):
        z = complex(z)
        return cls(z.real, z.imag)


def as_complex(z):
    """Accept a ComplexPoint or anything complex() understands."""
    if isinstance(z, ComplexPoint):
        return z.value
    value = complex(z)
    if not cmath.isfinite(value):
        raise ValueError(f'expected a finite complex value, received {z}')
    return value
