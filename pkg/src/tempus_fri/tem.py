"""
Crossing (C-TEM) and integrate-and-fire (IF-TEM) time-encoding machines.

Both encoders act on the filtered signal in its spectral form, so crossing
times and integrator thresholds are located against exact expressions
instead of a sampled waveform.  Only triggers in one period [0, T) are
returned.
"""

from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .exceptions import (
    ConfigurationError,
    DegenerateSamplingError,
    EmptyTriggerError,
    InsufficientTriggerError,
    PreconditionError,
)
from .signal_model import (
    FourierVector,
    FriSignal,
    SamplingKernel,
    eval_trig,
    filtered_signal,
    integral_trig,
    sup_norm,
)

__all__ = [
    "Machine",
    "CtemConfig",
    "IftemConfig",
    "TriggerSet",
    "MeasurementVector",
    "ReferenceAmplitudeWarning",
    "ctem_encode",
    "iftem_encode",
    "encode",
    "t_transform",
    "add_jitter",
    "ctem_measurements",
    "measurements_from_times",
    "multichannel_encode",
    "CtemSufficiency",
    "IftemSufficiency",
    "check_ctem_sufficiency",
    "check_iftem_sufficiency",
]

log = logging.getLogger(__name__)

# relative window below T inside which a trigger counts as "at T" and is dropped
END_OF_PERIOD_TOL = 1e-12
DUPLICATE_TOL = 1e-12
_RTOL = 4 * np.finfo(float).eps


class ReferenceAmplitudeWarning(UserWarning):
    """The C-TEM reference does not dominate the input; density bound may fail."""


class Machine(str, enum.Enum):
    CROSSING = "ctem"
    INTEGRATE_FIRE = "iftem"


@dataclass(frozen=True)
class CtemConfig:
    """Sinusoidal reference r(t) = amplitude * cos(2 pi frequency t + phase)."""

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ConfigurationError(f"reference amplitude must be positive, got {self.amplitude}")
        if not self.frequency > 0:
            raise ConfigurationError(f"reference frequency must be positive, got {self.frequency}")
        object.__setattr__(self, "phase", float(self.phase) % (2.0 * math.pi))

    kind = Machine.CROSSING

    def reference(self, t):
        return self.amplitude * np.cos(2.0 * np.pi * self.frequency * np.asarray(t) + self.phase)


@dataclass(frozen=True)
class IftemConfig:
    bias: float
    kappa: float
    threshold: float
    integrator_init: float = 0.0

    def __post_init__(self):
        for name in ("bias", "kappa", "threshold"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"IF-TEM {name} must be positive, got {getattr(self, name)}")
        if not 0 <= self.integrator_init < self.threshold:
            raise ConfigurationError(
                f"integrator_init must lie in [0, threshold), got {self.integrator_init}"
            )

    kind = Machine.INTEGRATE_FIRE


TemConfig = Union[CtemConfig, IftemConfig]


@dataclass(frozen=True)
class TriggerSet:
    times: np.ndarray
    period_T: float
    machine: Machine

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        if t.ndim != 1:
            raise ValueError("trigger times must be 1-D")
        if t.size and (t[0] < 0 or t[-1] >= self.period_T):
            raise ValueError("trigger times must lie in [0, T)")
        if np.any(np.diff(t) <= 0):
            raise ValueError("trigger times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "machine", Machine(self.machine))

    def __len__(self):
        return self.times.size

    @property
    def gaps(self):
        return np.diff(self.times)

    def density(self, wrap=False):
        """Largest gap between consecutive triggers (optionally across the period edge)."""
        g = self.gaps
        if wrap and len(self):
            g = np.append(g, self.times[0] + self.period_T - self.times[-1])
        return float(g.max()) if g.size else math.inf

    def __eq__(self, other):
        if not isinstance(other, TriggerSet):
            return NotImplemented
        return (
            self.period_T == other.period_T
            and self.machine == other.machine
            and np.array_equal(self.times, other.times)
        )

    __hash__ = None


@dataclass(frozen=True)
class MeasurementVector:
    values: np.ndarray
    machine: Machine

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "machine", Machine(self.machine))

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, MeasurementVector):
            return NotImplemented
        return self.machine == other.machine and np.array_equal(self.values, other.values)

    __hash__ = None


def _keep_in_period(times, T):
    times = np.sort(np.asarray(times, dtype=float))
    times = times[(times >= 0) & (times < T * (1.0 - END_OF_PERIOD_TOL))]
    if times.size > 1:
        keep = np.concatenate([[True], np.diff(times) > DUPLICATE_TOL * T])
        times = times[keep]
    return times


def _crossing_grid_size(y: FourierVector, cfg: CtemConfig):
    return max(4096, 64 * y.N, 64 * math.ceil(cfg.frequency * y.period_T))


def ctem_encode(y: FourierVector, cfg: CtemConfig):
    """Crossing times of y(t) with the reference, and the reference values there.

    Sign changes of y - r are bracketed on a uniform grid and each bracket
    is refined with Brent's method.  Tangential touches are not reported.
    """
    T = y.period_T
    ymax = sup_norm(y)
    if cfg.amplitude < ymax:
        warnings.warn(
            f"reference amplitude {cfg.amplitude} below max|y| = {ymax:.6g}; "
            "density guarantee does not apply",
            ReferenceAmplitudeWarning,
            stacklevel=2,
        )

    def diff(t):
        return eval_trig(y, t) - cfg.reference(t)

    G = _crossing_grid_size(y, cfg)
    grid = np.arange(G + 1) * (T / G)
    f = diff(grid)
    roots = list(grid[:-1][f[:-1] == 0.0])
    brackets = np.flatnonzero(f[:-1] * f[1:] < 0)
    for i in brackets:
        roots.append(brentq(diff, grid[i], grid[i + 1], xtol=1e-15 * T, rtol=_RTOL, maxiter=200))
    times = _keep_in_period(roots, T)
    if times.size == 0:
        raise EmptyTriggerError("no crossings between signal and reference in [0, T)")
    trig = TriggerSet(times, T, Machine.CROSSING)
    return trig, MeasurementVector(cfg.reference(times), Machine.CROSSING)


def _next_trigger(y, b, start, need, ymax):
    """Smallest t > start with int_start^t (b + y) = need."""

    def F(s):
        return b * (s - start) + integral_trig(y, start, s) - need

    lo = start + need / (b + ymax)
    hi = start + need / (b - ymax)
    # the grid sup can undershoot the true sup slightly; widen until bracketed
    width = hi - lo + need / b
    while F(lo) > 0:
        lo = max(start, lo - width)
    while F(hi) < 0:
        hi += width
    if F(lo) == 0:
        return lo
    return brentq(F, lo, hi, xtol=1e-15 * y.period_T, rtol=_RTOL, maxiter=200)


def iftem_encode(y: FourierVector, cfg: IftemConfig):
    """Spike times of the integrate-and-fire machine over one period.

    The integrator starts at ``cfg.integrator_init`` at t = 0 and is reset
    to zero at every spike.  Measurements are the t-transform local
    integrals, one per pair of consecutive spikes.
    """
    T = y.period_T
    ymax = sup_norm(y)
    b, kappa, gamma = cfg.bias, cfg.kappa, cfg.threshold
    if not b > ymax:
        raise PreconditionError(f"IF-TEM bias {b} must exceed max|y| = {ymax:.6g}")
    times = []
    t = 0.0
    need = kappa * (gamma - cfg.integrator_init)
    limit = T * (1.0 - END_OF_PERIOD_TOL)
    while True:
        t = _next_trigger(y, b, t, need, ymax)
        if t >= limit:
            break
        times.append(t)
        need = kappa * gamma
    if len(times) < 2:
        raise InsufficientTriggerError(f"IF-TEM produced {len(times)} trigger(s) in [0, T); need at least 2")
    trig = TriggerSet(times, T, Machine.INTEGRATE_FIRE)
    return trig, t_transform(trig, cfg)


def encode(y: FourierVector, cfg: TemConfig):
    if isinstance(cfg, CtemConfig):
        return ctem_encode(y, cfg)
    if isinstance(cfg, IftemConfig):
        return iftem_encode(y, cfg)
    raise TypeError(f"unknown machine configuration {cfg!r}")


def t_transform(times: TriggerSet, cfg: IftemConfig) -> MeasurementVector:
    """Local integrals -b (t_{n+1} - t_n) + kappa gamma from the trigger times alone."""
    if times.machine is not Machine.INTEGRATE_FIRE:
        raise ValueError("t-transform applies to integrate-and-fire trigger sets only")
    if len(times) < 2:
        raise ValueError("t-transform needs at least two trigger times")
    return MeasurementVector(-cfg.bias * np.diff(times.times) + cfg.kappa * cfg.threshold, Machine.INTEGRATE_FIRE)


def ctem_measurements(times: TriggerSet, cfg: CtemConfig) -> MeasurementVector:
    """Reference values at the (possibly jittered) crossing times."""
    return MeasurementVector(cfg.reference(times.times), Machine.CROSSING)


def measurements_from_times(times: TriggerSet, cfg: TemConfig) -> MeasurementVector:
    """Decoder-side measurements computed from trigger times and machine parameters."""
    if isinstance(cfg, CtemConfig):
        return ctem_measurements(times, cfg)
    return t_transform(times, cfg)


def _reflect(t, T):
    t = np.mod(t, 2.0 * T)
    t = np.where(t >= T, 2.0 * T - t, t)
    return np.where(t >= T, np.nextafter(T, 0.0), t)


def add_jitter(times: TriggerSet, sigma: float, rng_seed) -> TriggerSet:
    """Perturb each trigger by an independent draw from U[-sigma/2, sigma/2].

    Times pushed out of [0, T) are reflected back in.  The result is
    re-sorted and near-duplicates (within 1e-12 T) are merged, so it is
    again a valid trigger set, possibly shorter than the input.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return times
    rng = np.random.default_rng(rng_seed)
    T = times.period_T
    nu = rng.uniform(-sigma / 2.0, sigma / 2.0, size=len(times))
    t = np.sort(_reflect(times.times + nu, T))
    if t.size > 1:
        t = t[np.concatenate([[True], np.diff(t) > DUPLICATE_TOL * T])]
    return TriggerSet(t, T, times.machine)


def multichannel_encode(y: FourierVector, machines: Sequence):
    """Encode ``y`` independently with each channel.

    ``machines`` holds machine configurations, or ``(kind, config)`` pairs.
    Channels must not be identical and must not share trigger times.
    """
    cfgs = [m[1] if isinstance(m, tuple) else m for m in machines]
    if not cfgs:
        raise ConfigurationError("multichannel encoding needs at least one channel")
    for i in range(len(cfgs)):
        for j in range(i):
            if cfgs[i] == cfgs[j]:
                raise ConfigurationError(
                    f"channels {j} and {i} are identical; vary the reference phase (C-TEM) "
                    "or the integrator initial value (IF-TEM)"
                )
    out = [encode(y, cfg) for cfg in cfgs]
    T = y.period_T
    for i in range(len(out)):
        for j in range(i):
            a, b = out[j][0].times, out[i][0].times
            d = np.abs(np.subtract.outer(a, b))
            if d.size and d.min() <= DUPLICATE_TOL * T:
                raise DegenerateSamplingError(f"channels {j} and {i} have coincident trigger times")
    return out


@dataclass(frozen=True)
class CtemSufficiency:
    K: int
    period_T: float
    channels: int
    sup_norm: float
    amplitude: float
    amplitude_ok: bool
    amplitude_at_bound: bool
    frequency: float
    min_frequency: float
    frequency_ok: bool
    triggers: Optional[int]
    min_triggers: int
    triggers_ok: Optional[bool]

    @property
    def passed(self):
        return self.amplitude_ok and self.frequency_ok and self.triggers_ok is not False


@dataclass(frozen=True)
class IftemSufficiency:
    K: int
    period_T: float
    channels: int
    sup_norm: float
    triggers: int
    spacing_bound: float
    spacing_limit: float
    spacing_ok: bool
    min_triggers: int
    triggers_ok: Optional[bool]

    @property
    def passed(self):
        return self.spacing_ok and self.triggers_ok is not False


def check_ctem_sufficiency(
    signal: FriSignal,
    kernel: SamplingKernel,
    cfg: CtemConfig,
    L: Optional[int] = None,
    channels: int = 1,
) -> CtemSufficiency:
    """Report on the sufficient conditions for C-TEM recovery.

    Amplitude must strictly exceed max|x*g| and the reference frequency must
    reach (2K+1)/(C T) for C channels.  The trigger-count condition
    L >= 2K+1 is evaluated for a single channel only; when ``L`` is not
    given the signal is encoded to count the crossings.
    """
    y = filtered_signal(signal, kernel)
    ymax = sup_norm(y)
    K, T = signal.K, signal.period_T
    fmin = (2 * K + 1) / (channels * T)
    at_bound = bool(np.isclose(cfg.amplitude, ymax, rtol=1e-12, atol=0))
    if at_bound:
        log.warning("reference amplitude equals max|x*g|; the strict amplitude condition fails")
    if L is None and channels == 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ReferenceAmplitudeWarning)
            try:
                L = len(ctem_encode(y, cfg)[0])
            except EmptyTriggerError:
                L = 0
    triggers_ok = None if (channels != 1 or L is None) else L >= 2 * K + 1
    return CtemSufficiency(
        K=K,
        period_T=T,
        channels=channels,
        sup_norm=ymax,
        amplitude=cfg.amplitude,
        amplitude_ok=bool(cfg.amplitude > ymax),
        amplitude_at_bound=at_bound,
        frequency=cfg.frequency,
        min_frequency=fmin,
        frequency_ok=bool(cfg.frequency >= fmin * (1 - 1e-12)),
        triggers=L,
        min_triggers=2 * K + 1,
        triggers_ok=triggers_ok,
    )


def check_iftem_sufficiency(
    signal: FriSignal,
    kernel: SamplingKernel,
    cfg: IftemConfig,
    L: int,
    channels: int = 1,
) -> IftemSufficiency:
    """Report on kappa gamma / (b - max|x*g|) < C T / L.

    For a single channel also reports whether L - 1 >= 2K + 1.
    """
    y = filtered_signal(signal, kernel)
    ymax = sup_norm(y)
    if not cfg.bias > ymax:
        raise PreconditionError(f"IF-TEM bias {cfg.bias} must exceed max|x*g| = {ymax:.6g}")
    K, T = signal.K, signal.period_T
    lhs = cfg.kappa * cfg.threshold / (cfg.bias - ymax)
    rhs = channels * T / L
    return IftemSufficiency(
        K=K,
        period_T=T,
        channels=channels,
        sup_norm=ymax,
        triggers=L,
        spacing_bound=lhs,
        spacing_limit=rhs,
        spacing_ok=bool(lhs < rhs),
        min_triggers=2 * K + 2,
        triggers_ok=(L - 1 >= 2 * K + 1) if channels == 1 else None,
    )
