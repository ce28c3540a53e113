import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .omcore import OMConstants, OMScale, collapse_indices
from .utils import log_elapsed_time, split_evenly, worker_count


__all__ = [
    'JitterModel', 'OutcomeDistribution', 'OutcomeModel', 'CoefficientTable', 'WindowReport',
    'empirical_distribution', 'gaussian_model', 'coefficients', 'closed_form_width', 'floor_width',
    'total_variation', 'window_uniformity']


MIN_SAMPLES = 1000
CENTERINGS = ('cell', 'circle')
# Cells further than this many standard deviations from the mean carry no mass in double precision
_SIGMA_SPAN = 40
_MAX_EXACT_CELLS = 10 ** 7
_CELL_CHUNK = 1 << 20


@dataclass(frozen=True)
class JitterModel:
    """Normal scale jitter of width sigma_l, drawn from one seeded substream per batch."""

    sigma_l: float
    rng_seed: int
    samples: int = 100000
    batch_size: int = 10000

    def __post_init__(self):
        if not self.sigma_l > 0 or not math.isfinite(self.sigma_l):
            raise ValueError(f'sigma_l must be a positive real, received {self.sigma_l}')
        if self.samples < 1:
            raise ValueError(f'samples must be positive, received {self.samples}')
        if self.batch_size < 1:
            raise ValueError(f'batch_size must be positive, received {self.batch_size}')
        if self.rng_seed < 0:
            raise ValueError(f'rng_seed must be non-negative, received {self.rng_seed}')

    @property
    def batch_sizes(self):
        full, rest = divmod(self.samples, self.batch_size)
        return [self.batch_size] * full + ([rest] if rest else [])


@dataclass(frozen=True)
class OutcomeDistribution:
    n: int
    counts: tuple

    @property
    def total(self):
        return sum(self.counts)

    @property
    def probabilities(self):
        return np.asarray(self.counts, dtype=np.float64) / self.total

    def as_dict(self):
        return {k: count for k, count in enumerate(self.counts)}


@dataclass(frozen=True)
class OutcomeModel:
    n: int
    probabilities: tuple
    width: float
    floor_width: int
    centering: str

    def as_dict(self):
        return {k: p for k, p in enumerate(self.probabilities)}


@dataclass(frozen=True)
class CoefficientTable:
    k_star: int
    sigma_l: float
    model_sqrt: tuple
    closed_form: tuple
    closed_width: float

    def rows(self):
        return [
            {'k': k, 'model_sqrt': a, 'closed_form': b}
            for k, (a, b) in enumerate(zip(self.model_sqrt, self.closed_form))]


@dataclass(frozen=True)
class WindowReport:
    n: int
    l1_start: int
    width: int
    counts: tuple
    total_variation: float
    chi_square: float


def _sample_batch(l1, n, sigma_l, seed_sequence, size):
    rng = np.random.default_rng(seed_sequence)
    scales = np.rint(l1 + rng.normal(0.0, sigma_l, size))
    scales = np.maximum(scales, 0).astype(np.int64)
    outcomes = collapse_indices(scales, n)
    return np.bincount(outcomes, minlength=n).astype(np.int64)


def _sample_group(scale, sigma_l, group):
    counts = np.zeros(scale.n, dtype=np.int64)
    for seed_sequence, size in group:
        counts += _sample_batch(scale.l1, scale.n, sigma_l, seed_sequence, size)
    return counts


def empirical_distribution(scale, jitter, workers=None):
    """Tally k* over jittered scales round(l1 + eps), clamped at 0."""
    if jitter.samples < MIN_SAMPLES:
        raise ValueError(f'empirical_distribution needs at least {MIN_SAMPLES} samples, received {jitter.samples}')
    start_time = time.time()
    sizes = jitter.batch_sizes
    streams = np.random.SeedSequence(jitter.rng_seed).spawn(len(sizes))
    batches = list(zip(streams, sizes))
    workers = worker_count(workers)
    counts = np.zeros(scale.n, dtype=np.int64)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        futures = [
            executor.submit(_sample_group, scale, jitter.sigma_l, group)
            for group in split_evenly(batches, workers)]
        for future in futures:
            counts += future.result()
    log_elapsed_time(start_time, f'Sampled {jitter.samples} jittered collapses', samples=jitter.samples)
    return OutcomeDistribution(scale.n, tuple(int(c) for c in counts))


def floor_width(l1, sigma_l):
    return max(1, math.floor((l1 + sigma_l) / 2) - math.floor((l1 - sigma_l) / 2))


def _cell_probabilities(scale, sigma_l):
    # Outcome k collects the scale pairs {2c, 2c+1} with c = k mod n, i.e. v = (x + 1/2) / 2 in [c, c+1)
    n = scale.n
    mean = (scale.l1 + 0.5) / 2
    sd = sigma_l / 2
    clamp_mass = float(special.ndtr(-mean / sd))
    lo = max(0, math.floor(mean - _SIGMA_SPAN * sd))
    hi = math.ceil(mean + _SIGMA_SPAN * sd) + 1
    probabilities = np.zeros(n, dtype=np.float64)
    if hi - lo > _MAX_EXACT_CELLS:
        # sd is far above n, so the fold is flat up to O(n / sd)
        probabilities += (1 - clamp_mass) / n
    else:
        for start in range(lo, hi, _CELL_CHUNK):
            c = np.arange(start, min(start + _CELL_CHUNK, hi), dtype=np.float64)
            above = c + 0.5 > mean
            mass = np.where(
                above,
                special.ndtr((mean - c) / sd) - special.ndtr((mean - c - 1) / sd),
                special.ndtr((c + 1 - mean) / sd) - special.ndtr((c - mean) / sd))
            probabilities += np.bincount(c.astype(np.int64) % n, weights=mass, minlength=n)
    probabilities[0] += clamp_mass
    return probabilities


def _circle_probabilities(scale, width):
    n = scale.n
    offsets = np.arange(n) - scale.k_star
    if width > 10 * n:
        return np.ones(n, dtype=np.float64)
    wraps = np.arange(-(math.ceil(8 * width / n) + 2), math.ceil(8 * width / n) + 3)
    distances = offsets[:, None] + n * wraps[None, :]
    return np.exp(-distances ** 2 / (2 * width ** 2)).sum(axis=1)


def gaussian_model(scale, sigma_l, centering='cell'):
    """Outcome probabilities under normal scale jitter.

    cell integrates the jitter over each outcome's pair of scale cells and is the
    exact law sampled by empirical_distribution. circle is the wrapped Gaussian
    about k* with width sigma_l / 2 in index units.

    Jittered scales below zero clamp to l1 = 0, so under cell centering k = 0 also
    holds that mass. With sigma_l far above n the model is uniform only once l1 is
    large against sigma_l: OMScale(5, 2) at sigma_l = 1000 gives about (0.749, 0.251).
    """
    if not sigma_l > 0:
        raise ValueError(f'sigma_l must be positive, received {sigma_l}')
    if centering not in CENTERINGS:
        raise ValueError(f'centering must be one of {CENTERINGS}, received {centering!r}')
    width = sigma_l / 2
    if centering == 'cell':
        probabilities = _cell_probabilities(scale, sigma_l)
    else:
        probabilities = _circle_probabilities(scale, width)
    probabilities = probabilities / probabilities.sum()
    return OutcomeModel(
        scale.n, tuple(float(p) for p in probabilities), width, floor_width(scale.l1, sigma_l), centering)


def closed_form_width(constants=None):
    """Omega = sqrt(A + B) / (pi sqrt 2)."""
    constants = constants or OMConstants()
    return math.sqrt(constants.A + constants.B) / (math.pi * math.sqrt(2))


def coefficients(scale, constants=None, sigma_l=None):
    """Square roots of the symmetric model next to exp(-pi^2 (k - k*)^2 / (A + B))."""
    constants = constants or OMConstants()
    width = closed_form_width(constants)
    sigma_l = sigma_l or 2 * width
    model = gaussian_model(scale, sigma_l, centering='circle')
    k_star = scale.k_star
    closed = tuple(
        math.exp(-math.pi ** 2 * (k - k_star) ** 2 / (constants.A + constants.B)) for k in range(scale.n))
    return CoefficientTable(
        k_star, sigma_l, tuple(math.sqrt(p) for p in model.probabilities), closed, width)


def total_variation(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f'distributions differ in support size: {p.shape} and {q.shape}')
    return 0.5 * float(np.abs(p - q).sum())


def window_uniformity(n, l1_start, width):
    """How far k* over l1_start .. l1_start + width - 1 is from uniform."""
    OMScale(l1_start, n)
    if width < 1:
        raise ValueError(f'window width must be positive, received {width}')
    scales = np.arange(l1_start, l1_start + width, dtype=np.int64)
    counts = np.bincount(collapse_indices(scales, n), minlength=n)
    chi_square = float(stats.chisquare(counts, np.full(n, width / n)).statistic)
    tv = total_variation(counts / width, np.full(n, 1 / n))
    return WindowReport(n, l1_start, width, tuple(int(c) for c in counts), tv, chi_square)
