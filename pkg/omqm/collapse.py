import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from nanome.util import Logs
from scipy import integrate

from .numtheory import factorize, mertens, mobius
from .omcore import EvaluationError, OMConstants, OMScale
from .utils import chunks, to_jsonable, worker_count
from .zeta import prime_power_zeta_sum, zeta_inverse_offset, zeta_offset


__all__ = [
    'CertificationError', 'OMMixedState', 'BraidLevel', 'StretchCertificate', 'CollapseOutcome',
    'petal_volume_quadrature', 'build_mixed_state', 'scale_cut', 'key_cylinder_collapse',
    'zeta_stretch_collapse', 'collapse_batch']


PATH_KEY = 'key-cylinder'
PATH_ZETA = 'zeta-stretch'
PATH_CHOICES = {'key': (PATH_KEY,), 'zeta': (PATH_ZETA,), 'both': (PATH_KEY, PATH_ZETA)}

CERTIFICATE_TOLERANCE = 1e-9
PRIME_POWER_CUTOFF = 10 ** 5


class CertificationError(EvaluationError):
    pass


@dataclass(frozen=True)
class OMMixedState:
    """Petal volume vol_R = alpha ln(l1) and loop volume vol_H = alpha * active loops.

    compensated_vol_R holds curvature removed by earlier scale cuts and does not
    take part in equality.
    """

    scale: OMScale
    alpha_tilde: float
    vol_R: float
    vol_H: float
    compensated_vol_R: float = field(default=0.0, compare=False)

    @property
    def active_loops(self):
        return self.scale.k_star

    @property
    def key_length(self):
        return self.scale.k_star

    @property
    def exponent(self):
        return complex(self.vol_R, self.vol_H)

    @property
    def value(self):
        return cmath.exp(self.exponent)


def petal_volume_quadrature(l1, alpha_tilde):
    """Integral of alpha / u over [1, l1]."""
    if l1 < 1:
        raise ValueError(f'petal volume needs l1 >= 1, received {l1}')
    value, _ = integrate.quad(lambda u: alpha_tilde / u, 1, l1, epsabs=1e-13, epsrel=1e-13, limit=200)
    return value


def _state(scale, alpha_tilde, compensated=0.0):
    if scale.l1 < 1:
        raise ValueError(f'mixed state needs l1 >= 1, received {scale.l1}')
    return OMMixedState(
        scale, alpha_tilde, alpha_tilde * math.log(scale.l1), alpha_tilde * scale.k_star, compensated)


def build_mixed_state(scale, constants=None):
    constants = constants or OMConstants()
    return _state(scale, constants.alpha_tilde)


def scale_cut(state, l1_cut):
    """Truncate state to l1_cut. The curvature beyond the cut moves to compensated_vol_R."""
    if not 1 <= l1_cut <= state.scale.l1:
        raise ValueError(f'scale cut must satisfy 1 <= cut <= {state.scale.l1}, received {l1_cut}')
    cut_scale = OMScale(l1_cut, state.scale.n, state.scale.convention)
    vol_R = state.alpha_tilde * math.log(l1_cut)
    compensated = state.compensated_vol_R + (state.vol_R - vol_R)
    return _state(cut_scale, state.alpha_tilde, compensated)


@dataclass(frozen=True)
class BraidLevel:
    """One level of the key cylinder: a crossing group per prime factor of the index."""

    index: int
    crossing_profile: tuple

    @classmethod
    def from_index(cls, j, table=None):
        return cls(j, tuple(factorize(j, table).items()))

    @property
    def rotation(self):
        if any(multiplicity >= 2 for _, multiplicity in self.crossing_profile):
            return 0
        return -1 if len(self.crossing_profile) % 2 else 1


@dataclass(frozen=True)
class StretchCertificate:
    t_star: float
    t_offset: float
    zeta_at_t_star: float
    prime_power_sum: float
    tail_bound: float

    def to_dict(self):
        return {
            't_star': self.t_star, 't_offset': self.t_offset, 'zeta_at_t_star': self.zeta_at_t_star,
            'prime_power_sum': self.prime_power_sum, 'tail_bound': self.tail_bound}


@dataclass(frozen=True)
class CollapseOutcome:
    scale: OMScale
    k_star: int
    rotation_trace: tuple
    rotation_sum: int
    phase: complex
    path: str
    convention: bool = False
    certificate: Optional[StretchCertificate] = None

    def to_dict(self):
        result = {
            'l1': self.scale.l1,
            'n': self.scale.n,
            'k_star': self.k_star,
            'rotation_trace': list(self.rotation_trace),
            'rotation_sum': self.rotation_sum,
            'phase_re': self.phase.real,
            'phase_im': self.phase.imag,
            'path': self.path,
        }
        if self.path == PATH_ZETA:
            result['convention'] = self.convention
            result['certificate'] = self.certificate.to_dict() if self.certificate else None
        return to_jsonable(result)


def _phase(k_star, constants):
    return cmath.exp(1j * constants.alpha_tilde * k_star)


def key_cylinder_collapse(scale, constants=None, table=None):
    """Walk the braid levels 1..k*, accumulating each level's rotation."""
    constants = constants or OMConstants()
    k_star = scale.k_star
    trace = tuple(BraidLevel.from_index(j, table).rotation for j in range(1, k_star + 1))
    return CollapseOutcome(scale, k_star, trace, sum(trace), _phase(k_star, constants), PATH_KEY)


@lru_cache(maxsize=4096)
def _stretch_certificate(k_star, alpha_tilde, cutoff, tolerance):
    offset = zeta_inverse_offset(float(k_star))
    t_star = 1.0 + offset
    zeta_value = zeta_offset(offset)
    partial = prime_power_zeta_sum(t_star, cutoff)
    miss = abs(zeta_value - k_star)
    if alpha_tilde * miss >= tolerance:
        raise CertificationError(
            f'zeta stretch for k* = {k_star} missed by {miss} at t* = 1 + {offset!r}, '
            f'prime-power sum {partial.value} with tail bound {partial.tail_bound}')
    return StretchCertificate(t_star, offset, zeta_value, partial.value, partial.tail_bound)


def zeta_stretch_collapse(scale, constants=None, table=None, cutoff=PRIME_POWER_CUTOFF,
                          tolerance=CERTIFICATE_TOLERANCE):
    """Recover k* as zeta(zeta^-1(k*)). k* in {0, 1} has no preimage and is returned by convention."""
    constants = constants or OMConstants()
    target = scale.k_star
    trace = tuple(mobius(j, table) for j in range(1, target + 1))
    if target < 2:
        return CollapseOutcome(
            scale, target, trace, sum(trace), _phase(target, constants), PATH_ZETA, convention=True)
    certificate = _stretch_certificate(target, constants.alpha_tilde, cutoff, tolerance)
    k_star = round(certificate.zeta_at_t_star)
    return CollapseOutcome(
        scale, k_star, trace, mertens(k_star, table), _phase(k_star, constants), PATH_ZETA,
        certificate=certificate)


_COLLAPSE_FUNCTIONS = {PATH_KEY: key_cylinder_collapse, PATH_ZETA: zeta_stretch_collapse}


def _collapse_chunk(scales, paths, constants, table):
    return [tuple(_COLLAPSE_FUNCTIONS[path](scale, constants, table) for path in paths) for scale in scales]


def collapse_batch(scales, path='both', constants=None, table=None, workers=None):
    """Collapse every scale along the chosen path(s). Each result is a tuple, one outcome per path."""
    if path not in PATH_CHOICES:
        raise ValueError(f'unknown collapse path {path!r}, expected one of {sorted(PATH_CHOICES)}')
    constants = constants or OMConstants()
    scales = list(scales)
    workers = worker_count(workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_collapse_chunk, chunk, PATH_CHOICES[path], constants, table)
            for chunk in chunks(scales, max(1, len(scales) // workers + 1))]
        outcomes = [outcome for future in futures for outcome in future.result()]
    Logs.debug(f'Collapsed {len(outcomes)} scales', extra={'path': path, 'scale_count': len(outcomes)})
    return outcomes
