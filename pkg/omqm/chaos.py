import math
import time
from dataclasses import dataclass

from nanome.util import Logs

from .omcore import FEIGENBAUM_DELTA, FRACTAL_DIMENSION, EvaluationError
from .utils import log_elapsed_time


__all__ = [
    'DivergenceError', 'ConvergenceError', 'RosslerParams', 'FineStructureResult', 'ScalingReport',
    'rossler_trajectory', 'integrate_rossler', 'lyapunov_largest', 'superstable_parameters',
    'feigenbaum_ratios', 'feigenbaum_delta', 'fine_structure', 'scaling_law_report']


FINE_STRUCTURE_INVERSE = 137.035999084
MIN_LEVELS = 6
MAX_LEVELS = 14
DIVERGENCE_LIMIT = 1e6
RENORMALISE_EVERY = 10
NEIGHBOUR_OFFSET = 1e-8


class DivergenceError(EvaluationError):
    pass


class ConvergenceError(EvaluationError):
    pass


@dataclass(frozen=True)
class RosslerParams:
    a: float = 0.2
    b: float = 0.2
    c: float = 5.7
    dt: float = 0.01
    t_total: float = 500.0
    transient: float = 50.0
    initial: tuple = (1.0, 1.0, 0.0)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f'dt must be positive, received {self.dt}')
        if not 0 <= self.transient < self.t_total:
            raise ValueError(f'need 0 <= transient < t_total, received {self.transient} and {self.t_total}')
        if len(self.initial) != 3:
            raise ValueError(f'initial state needs three coordinates, received {self.initial}')

    @classmethod
    def from_string(cls, text, **overrides):
        """Parse 'a,b,c,dt,t'."""
        parts = [p.strip() for p in text.split(',')]
        if len(parts) != 5:
            raise ValueError(f'expected "a,b,c,dt,t", received {text!r}')
        a, b, c, dt, t_total = (float(p) for p in parts)
        return cls(a, b, c, dt, t_total, **overrides)

    @property
    def steps(self):
        return int(round(self.t_total / self.dt))

    @property
    def transient_steps(self):
        return int(round(self.transient / self.dt))


@dataclass(frozen=True)
class FineStructureResult:
    reading_printed: float
    reading_matching: float
    D: float
    delta: float
    closer_reading: str


@dataclass(frozen=True)
class ScalingReport:
    lyapunov: float
    cycles: int
    mean_period: float
    measured_ratio: float
    formula_value: float
    K: float


def _flow(state, params):
    x, y, z = state
    return (-y - z, x + params.a * y, params.b + z * (x - params.c))


def _tangent_flow(state, params):
    x, y, z, u, v, w = state
    return (
        -y - z, x + params.a * y, params.b + z * (x - params.c),
        -v - w, u + params.a * v, z * u + (x - params.c) * w)


def _rk4(f, state, dt, params):
    k1 = f(state, params)
    k2 = f(tuple(s + dt / 2 * k for s, k in zip(state, k1)), params)
    k3 = f(tuple(s + dt / 2 * k for s, k in zip(state, k2)), params)
    k4 = f(tuple(s + dt * k for s, k in zip(state, k3)), params)
    return tuple(s + dt / 6 * (a + 2 * b + 2 * c + d) for s, a, b, c, d in zip(state, k1, k2, k3, k4))


def _check(state, t):
    if not all(math.isfinite(s) and abs(s) < DIVERGENCE_LIMIT for s in state[:3]):
        raise DivergenceError(f'Rossler trajectory diverged at t = {t:.2f}: {state[:3]}')


def integrate_rossler(params, t_end=None):
    """State at t_end (default t_total) from params.initial."""
    t_end = params.t_total if t_end is None else t_end
    state = tuple(float(s) for s in params.initial)
    for step in range(int(round(t_end / params.dt))):
        state = _rk4(_flow, state, params.dt, params)
        _check(state, step * params.dt)
    return state


def rossler_trajectory(params, stride=10):
    """(t, x, y, z) rows every stride steps."""
    if stride < 1:
        raise ValueError(f'stride must be positive, received {stride}')
    state = tuple(float(s) for s in params.initial)
    rows = [(0.0,) + state]
    for step in range(1, params.steps + 1):
        state = _rk4(_flow, state, params.dt, params)
        _check(state, step * params.dt)
        if step % stride == 0:
            rows.append((step * params.dt,) + state)
    return rows


def lyapunov_largest(params):
    """Largest Lyapunov exponent by tangent-vector renormalisation."""
    start_time = time.time()
    state = tuple(float(s) for s in params.initial) + (1.0, 0.0, 0.0)
    log_sum = 0.0
    for step in range(1, params.steps + 1):
        state = _rk4(_tangent_flow, state, params.dt, params)
        if step % RENORMALISE_EVERY:
            continue
        _check(state, step * params.dt)
        norm = math.sqrt(state[3] ** 2 + state[4] ** 2 + state[5] ** 2)
        if norm == 0 or not math.isfinite(norm):
            raise DivergenceError(f'tangent vector degenerated at t = {step * params.dt:.2f}')
        state = state[:3] + tuple(s / norm for s in state[3:])
        if step > params.transient_steps:
            log_sum += math.log(norm)
    measured_time = (params.steps - params.transient_steps) * params.dt
    exponent = log_sum / measured_time
    log_elapsed_time(start_time, 'Lyapunov estimate', lyapunov=exponent, c=params.c)
    return exponent


def _critical_orbit(a, period):
    x, dx = 0.5, 0.0
    for _ in range(period):
        dx = x * (1 - x) + a * (1 - 2 * x) * dx
        x = a * x * (1 - x)
    return x - 0.5, dx


def superstable_parameters(levels):
    """Superstable logistic parameters a_0 .. a_levels of periods 1, 2, 4, ..."""
    if not MIN_LEVELS <= levels <= MAX_LEVELS:
        raise ValueError(f'levels must be in {MIN_LEVELS}..{MAX_LEVELS}, received {levels}')
    parameters = [2.0, 1 + math.sqrt(5)]
    ratio = 4.7
    for m in range(2, levels + 1):
        a = parameters[-1] + (parameters[-1] - parameters[-2]) / ratio
        for _ in range(100):
            g, dg = _critical_orbit(a, 2 ** m)
            if dg == 0:
                raise ConvergenceError(f'Newton step vanished at cascade level {m}')
            step = g / dg
            a -= step
            if abs(step) < 1e-15 * a:
                break
        else:
            raise ConvergenceError(f'Newton did not converge at cascade level {m}')
        if not parameters[-1] < a < 4:
            raise ConvergenceError(f'Newton left the cascade at level {m}: a = {a}')
        ratio = (parameters[-1] - parameters[-2]) / (a - parameters[-1])
        parameters.append(a)
    return parameters


def feigenbaum_ratios(levels):
    a = superstable_parameters(levels)
    return [(a[m] - a[m - 1]) / (a[m + 1] - a[m]) for m in range(1, len(a) - 1)]


def feigenbaum_delta(levels=10):
    delta = feigenbaum_ratios(levels)[-1]
    Logs.debug(f'Feigenbaum estimate at {levels} levels: {delta}', extra={'levels': levels, 'delta': delta})
    return delta


def fine_structure(D=FRACTAL_DIMENSION, delta=FEIGENBAUM_DELTA):
    """Both readings: D * sqrt(exp(sqrt(pi delta))) and D * exp(sqrt(pi delta))."""
    if not D > 0 or not delta > 0:
        raise ValueError(f'fine_structure needs D > 0 and delta > 0, received {D} and {delta}')
    growth = math.exp(math.sqrt(math.pi * delta))
    printed = D * math.sqrt(growth)
    matching = D * growth
    closer = 'matching' if abs(matching - 137) < abs(printed - 137) else 'printed'
    return FineStructureResult(printed, matching, D, delta, closer)


def scaling_law_report(params, K=1.0):
    """Per-cycle growth of a renormalised neighbour against K exp(sqrt(pi lambda)).

    Cycles are returns to the half plane y = 0, x > 0 crossed upward.
    """
    lyapunov = lyapunov_largest(params)
    main = tuple(float(s) for s in params.initial)
    neighbour = (main[0] + NEIGHBOUR_OFFSET,) + main[1:]
    log_growth = 0.0
    cycles = 0
    last_crossing = None
    periods = []
    for step in range(1, params.steps + 1):
        previous_y = main[1]
        main = _rk4(_flow, main, params.dt, params)
        neighbour = _rk4(_flow, neighbour, params.dt, params)
        _check(main, step * params.dt)
        if step <= params.transient_steps or not (previous_y < 0 <= main[1] and main[0] > 0):
            continue
        t = step * params.dt
        distance = math.sqrt(sum((p - q) ** 2 for p, q in zip(main, neighbour)))
        if last_crossing is not None:
            periods.append(t - last_crossing)
            log_growth += math.log(distance / NEIGHBOUR_OFFSET)
            cycles += 1
        last_crossing = t
        scale = NEIGHBOUR_OFFSET / distance
        neighbour = tuple(p + (q - p) * scale for p, q in zip(main, neighbour))
    if cycles == 0:
        raise EvaluationError('no complete cycle on the Poincare section after the transient')
    measured = math.exp(log_growth / cycles)
    formula = K * math.exp(math.sqrt(math.pi * max(lyapunov, 0.0)))
    return ScalingReport(lyapunov, cycles, sum(periods) / len(periods), measured, formula, K)
