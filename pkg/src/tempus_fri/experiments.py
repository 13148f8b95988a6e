"""
Declarative experiment runs: noise-free recovery and Monte Carlo jitter
sweeps over one signal and a list of (possibly multichannel) machines.

Seeding
-------
All randomness is derived from explicit integer tuples so that records do
not depend on execution order or the number of worker processes.

* generated signal: ``default_rng(signal.seed)``
* unset reference phase of channel j of machine i: ``default_rng([seed, i, j])``
* jitter for trial t on channel j of machine i: ``default_rng([seed + t, i, j])``,
  shared across sigma levels (common random numbers)
* solver restarts for trial t: ``rng_seed = seed + t``
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigurationError, TempusError
from .genfri import GenfriOptions, genfri_tem
from .reconstruction import ForwardSystem, forward_system, nmse_shifts, stack_channels
from .signal_model import (
    BSpline,
    Dirac,
    FriSignal,
    PulseDescriptor,
    SamplingKernel,
    filtered_signal,
    sup_norm,
)
from .tem import (
    CtemConfig,
    IftemConfig,
    ReferenceAmplitudeWarning,
    TriggerSet,
    add_jitter,
    check_ctem_sufficiency,
    check_iftem_sufficiency,
    encode,
    measurements_from_times,
)

__all__ = [
    "SignalSpec",
    "MachineSpec",
    "NoiseSpec",
    "RunConfig",
    "TrialRecord",
    "parse_config",
    "build_signal",
    "generate_x1",
    "x2_signal",
    "resolve_channels",
    "encode_machine",
    "noise_eta",
    "run_noise_free",
    "run_jitter_sweep",
    "sufficiency_report",
    "required_iftem_triggers",
    "summarize",
    "with_seed",
    "build_kernel",
    "DEFAULT_SIGMAS",
]

log = logging.getLogger(__name__)

DEFAULT_SIGMAS = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0)
X2_AMPLITUDES = (0.5, -0.35, 0.3)
X2_SHIFTS = (0.20, 0.34, 0.74)
X2_PULSE = BSpline(3, 10.0)


@dataclass(frozen=True)
class SignalSpec:
    """Either a generated Dirac stream (``kind="x1"``), the fixed B-spline
    stream (``kind="x2"``) or explicit parameters (``kind="explicit"``).

    For ``x1``, shifts are uniform on [0, T) and redrawn until the minimum
    circular gap exceeds ``min_gap`` (default T/(8K)); amplitudes are
    N(mean, std) and, when ``min_amplitude_ratio`` > 0, redrawn jointly
    with the shifts until min|c|/max|c| reaches it.  ``normalize_peak``
    rescales the amplitudes so that max|x*g| equals it.
    """

    kind: str = "x1"
    K: int = 5
    period_T: float = 1.0
    seed: int = 0
    amplitude_mean: float = 0.5
    amplitude_std: float = 1.0
    min_gap: Optional[float] = None
    min_amplitude_ratio: float = 0.0
    normalize_peak: Optional[float] = 0.4
    pulse: PulseDescriptor = field(default_factory=Dirac)
    amplitudes: Tuple[float, ...] = ()
    shifts: Tuple[float, ...] = ()


@dataclass(frozen=True)
class MachineSpec:
    """A named group of channels decoded jointly."""

    name: str
    channels: Tuple = ()


@dataclass(frozen=True)
class NoiseSpec:
    sigmas: Tuple[float, ...] = DEFAULT_SIGMAS
    trials: int = 100


@dataclass(frozen=True)
class RunConfig:
    signal: SignalSpec
    machines: Tuple[MachineSpec, ...]
    M: Optional[int] = None
    gains: Optional[Tuple[complex, ...]] = None
    noise: NoiseSpec = NoiseSpec()
    solver: GenfriOptions = GenfriOptions()
    output_path: Optional[str] = None
    output_format: str = "csv"
    seed: int = 0

    def __post_init__(self):
        if not self.machines:
            raise ConfigurationError("machine list must be nonempty")
        if self.noise.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if any(not s >= 0 for s in self.noise.sigmas):
            raise ConfigurationError("sigma values must be nonnegative")
        if self.output_format not in ("csv", "json"):
            raise ConfigurationError(f"unknown output format {self.output_format!r}")

    @property
    def kernel_M(self):
        return self.signal.K if self.M is None else int(self.M)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    sigma: float
    machine: str
    nmse: float
    residual: float
    converged: bool
    true_shifts: Tuple[float, ...]
    est_shifts: Tuple[float, ...]
    runtime_ms: Optional[float] = None


# ---------------------------------------------------------------- parsing


def _parse_pulse(d):
    if d is None:
        return Dirac()
    kind = str(d.get("type", "dirac")).lower()
    if kind == "dirac":
        return Dirac()
    if kind in ("bspline", "b-spline"):
        return BSpline(int(d.get("degree", 3)), float(d.get("time_scale", 1.0)))
    raise ConfigurationError(f"unknown pulse type {kind!r}")


def _pulse_to_dict(p):
    if isinstance(p, BSpline):
        return {"type": "bspline", "degree": p.degree, "time_scale": p.time_scale}
    return {"type": "dirac"}


def _opt_float(v):
    return None if v is None else float(v)


def _parse_signal(d):
    d = dict(d or {})
    kind = str(d.get("kind", "x1")).lower()
    if kind == "x1":
        return SignalSpec(
            kind="x1",
            K=int(d.get("K", 5)),
            period_T=float(d.get("period", 1.0)),
            seed=int(d.get("seed", 0)),
            amplitude_mean=float(d.get("amplitude_mean", 0.5)),
            amplitude_std=float(d.get("amplitude_std", 1.0)),
            min_gap=None if d.get("min_gap") is None else float(d["min_gap"]),
            min_amplitude_ratio=float(d.get("min_amplitude_ratio", 0.0)),
            normalize_peak=_opt_float(d.get("normalize_peak", 0.4)),
        )
    if kind == "x2":
        return SignalSpec(
            kind="x2",
            K=3,
            pulse=X2_PULSE,
            amplitudes=X2_AMPLITUDES,
            shifts=X2_SHIFTS,
            normalize_peak=None,
        )
    if kind == "explicit":
        amps = tuple(float(v) for v in d["amplitudes"])
        shifts = tuple(float(v) for v in d["shifts"])
        if len(amps) != len(shifts):
            raise ConfigurationError("explicit signal needs as many amplitudes as shifts")
        return SignalSpec(
            kind="explicit",
            K=len(amps),
            period_T=float(d.get("period", 1.0)),
            pulse=_parse_pulse(d.get("pulse")),
            amplitudes=amps,
            shifts=shifts,
            normalize_peak=None if d.get("normalize_peak") is None else float(d["normalize_peak"]),
        )
    raise ConfigurationError(f"unknown signal kind {kind!r}")


def _parse_channel(d):
    kind = str(d.get("type", "")).lower()
    if kind == "ctem":
        phase = d.get("phase")
        return ("ctem", float(d["amplitude"]), float(d["frequency"]), None if phase is None else float(phase))
    if kind == "iftem":
        return IftemConfig(
            float(d["bias"]), float(d["kappa"]), float(d["threshold"]), float(d.get("integrator_init", 0.0))
        )
    raise ConfigurationError(f"unknown channel type {kind!r}")


def _parse_machines(items):
    if not items:
        raise ConfigurationError("machine list must be nonempty")
    out = []
    for i, m in enumerate(items):
        chans = m.get("channels")
        if chans is None:
            chans = [m]
        if not chans:
            raise ConfigurationError(f"machine {i} has no channels")
        out.append(MachineSpec(str(m.get("name", f"machine{i}")), tuple(_parse_channel(c) for c in chans)))
    return tuple(out)


def parse_config(d: dict) -> RunConfig:
    """Build a :class:`RunConfig` from the JSON structure.

    Sections: ``signal``, ``kernel``, ``machines``, ``noise``, ``solver``,
    ``output`` and a top-level ``seed``.
    """
    if not isinstance(d, dict):
        raise ConfigurationError("configuration must be a JSON object")
    signal = _parse_signal(d.get("signal"))
    kernel = d.get("kernel") or {}
    noise = d.get("noise") or {}
    solver = d.get("solver") or {}
    output = d.get("output") or {}
    seed = int(d.get("seed", 0))
    gains = kernel.get("gains")
    if gains is not None:
        gains = tuple(complex(*g) if isinstance(g, (list, tuple)) else complex(g) for g in gains)
    try:
        return RunConfig(
            signal=signal,
            machines=_parse_machines(d.get("machines")),
            M=kernel.get("M"),
            gains=gains,
            noise=NoiseSpec(
                sigmas=tuple(float(s) for s in noise.get("sigmas", DEFAULT_SIGMAS)),
                trials=int(noise.get("trials", 100)),
            ),
            solver=GenfriOptions(
                eta=None if solver.get("eta") is None else float(solver["eta"]),
                max_iters=int(solver.get("max_iters", 50)),
                max_restarts=int(solver.get("max_restarts", 50)),
                rng_seed=seed,
            ),
            output_path=output.get("path"),
            output_format=str(output.get("format", "csv")),
            seed=seed,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(f"invalid configuration: {exc}") from exc


def with_seed(cfg: RunConfig, seed: int) -> RunConfig:
    """Copy of ``cfg`` with the master seed replaced."""
    return replace(cfg, seed=int(seed), solver=replace(cfg.solver, rng_seed=int(seed)))


# ---------------------------------------------------------------- signals


def _min_circular_gap(tau, T):
    if tau.size < 2:
        return T
    s = np.sort(tau)
    return float(np.diff(np.append(s, s[0] + T)).min())


def generate_x1(spec: SignalSpec, kernel: SamplingKernel) -> FriSignal:
    rng = np.random.default_rng(spec.seed)
    T, K = spec.period_T, spec.K
    min_gap = T / (8 * K) if spec.min_gap is None else spec.min_gap
    for _ in range(100000):
        tau = np.sort(rng.uniform(0.0, T, K))
        if _min_circular_gap(tau, T) <= min_gap:
            continue
        c = rng.normal(spec.amplitude_mean, spec.amplitude_std, K)
        a = np.abs(c)
        if spec.min_amplitude_ratio > 0 and not a.min() >= spec.min_amplitude_ratio * a.max():
            continue
        break
    else:
        raise ConfigurationError("x1 generator could not satisfy the separation/amplitude constraints")
    sig = FriSignal(T, Dirac(), c, tau)
    return _normalize(sig, kernel, spec.normalize_peak)


def x2_signal() -> FriSignal:
    return FriSignal(1.0, X2_PULSE, X2_AMPLITUDES, X2_SHIFTS)


def _normalize(sig, kernel, peak):
    if peak is None:
        return sig
    s = sup_norm(filtered_signal(sig, kernel))
    if s == 0:
        raise ConfigurationError("cannot normalise a signal whose filtered version vanishes")
    return FriSignal(sig.period_T, sig.pulse, sig.amplitudes * (peak / s), sig.shifts)


def build_kernel(cfg: RunConfig) -> SamplingKernel:
    return SamplingKernel(cfg.kernel_M, cfg.signal.period_T, cfg.gains)


def build_signal(cfg: RunConfig) -> FriSignal:
    spec = cfg.signal
    kernel = build_kernel(cfg)
    if spec.kind == "x1":
        return generate_x1(spec, kernel)
    if spec.kind == "x2":
        return x2_signal()
    sig = FriSignal(spec.period_T, spec.pulse, spec.amplitudes, spec.shifts)
    return _normalize(sig, kernel, spec.normalize_peak)


# ---------------------------------------------------------------- machines


def resolve_channels(cfg: RunConfig, machine_idx: int) -> List:
    """Concrete encoder configs; unset C-TEM phases are drawn uniformly on [0, 2 pi)."""
    out = []
    for j, ch in enumerate(cfg.machines[machine_idx].channels):
        if isinstance(ch, tuple):
            _, amp, freq, phase = ch
            if phase is None:
                phase = np.random.default_rng([cfg.seed, machine_idx, j]).uniform(0.0, 2.0 * np.pi)
            out.append(CtemConfig(amp, freq, phase))
        else:
            out.append(ch)
    return out


def encode_machine(y, channels) -> List[TriggerSet]:
    """Noise-free trigger sets, one per channel."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReferenceAmplitudeWarning)
        return [encode(y, ch)[0] for ch in channels]


def noise_eta(channels, times: Sequence[TriggerSet], sigma: float) -> float:
    """Expected |noise|^2 of the stacked measurements under U[-sigma/2, sigma/2] jitter.

    C-TEM rows contribute r'(t_n)^2 sigma^2/12 (first order), IF-TEM rows
    2 b^2 sigma^2/12 (difference of two independent jitters).
    """
    var = sigma * sigma / 12.0
    total = 0.0
    for ch, tr in zip(channels, times):
        if isinstance(ch, CtemConfig):
            w = 2.0 * np.pi * ch.frequency
            dr = ch.amplitude * w * np.sin(w * tr.times + ch.phase)
            total += float(np.sum(dr * dr)) * var
        else:
            total += max(len(tr) - 1, 0) * 2.0 * ch.bias**2 * var
    return total


def _system(channels, times, M) -> ForwardSystem:
    return stack_channels([forward_system(tr, measurements_from_times(tr, ch), M) for ch, tr in zip(channels, times)])


def _solve(cfg, signal, channels, times, eta, rng_seed):
    system = _system(channels, times, cfg.kernel_M)
    opts = GenfriOptions(eta, cfg.solver.max_iters, cfg.solver.max_restarts, rng_seed)
    return genfri_tem(system, signal.K, opts, signal.pulse)


def _record(trial, sigma, name, signal, res, runtime_ms):
    est = tuple(float(v) for v in res.shifts)
    return TrialRecord(
        trial=trial,
        sigma=float(sigma),
        machine=name,
        nmse=float(nmse_shifts(signal.shifts, res.shifts, signal.period_T)),
        residual=float(res.residual),
        converged=bool(res.converged),
        true_shifts=tuple(float(v) for v in signal.shifts),
        est_shifts=est,
        runtime_ms=runtime_ms,
    )


def _failed(trial, sigma, name, signal, runtime_ms):
    return TrialRecord(
        trial=trial,
        sigma=float(sigma),
        machine=name,
        nmse=math.nan,
        residual=math.nan,
        converged=False,
        true_shifts=tuple(float(v) for v in signal.shifts),
        est_shifts=(),
        runtime_ms=runtime_ms,
    )


# ---------------------------------------------------------------- runs


def required_iftem_triggers(K: int, channels: int = 1) -> int:
    """Per-channel trigger count L with sum_c (L - 1) >= 2K + 1."""
    return -(-(2 * K + 1) // channels) + 1


def sufficiency_report(cfg: RunConfig, signal: Optional[FriSignal] = None) -> List[dict]:
    """One entry per channel with the sufficient-condition checks."""
    signal = build_signal(cfg) if signal is None else signal
    kernel = build_kernel(cfg)
    y = filtered_signal(signal, kernel)
    out = []
    for i, m in enumerate(cfg.machines):
        channels = resolve_channels(cfg, i)
        C = len(channels)
        for j, ch in enumerate(channels):
            entry = {"machine": m.name, "channel": j}
            try:
                L = len(encode_machine(y, [ch])[0])
            except TempusError as exc:
                entry.update(passed=False, error=f"{type(exc).__name__}: {exc}")
                out.append(entry)
                continue
            try:
                if isinstance(ch, CtemConfig):
                    rep = check_ctem_sufficiency(signal, kernel, ch, L=L if C == 1 else None, channels=C)
                else:
                    need = required_iftem_triggers(signal.K, C)
                    rep = check_iftem_sufficiency(signal, kernel, ch, need, channels=C)
                    entry["observed_ok"] = L >= need
            except TempusError as exc:
                entry.update(passed=False, error=f"{type(exc).__name__}: {exc}")
                out.append(entry)
                continue
            entry.update(type=ch.kind.value, triggers=L, passed=rep.passed, report=_plain(rep.__dict__))
            out.append(entry)
    return out


def _plain(d):
    return {k: (v if not isinstance(v, (np.floating, np.integer, np.bool_)) else v.item()) for k, v in d.items()}


def run_noise_free(cfg: RunConfig, timing: bool = False) -> List[TrialRecord]:
    """One record per machine (sigma = 0, trial = 0).

    Failed sufficiency checks are logged as warnings; encoder errors
    propagate with the machine name attached.
    """
    signal = build_signal(cfg)
    y = filtered_signal(signal, build_kernel(cfg))
    for entry in sufficiency_report(cfg, signal):
        if not entry.get("passed"):
            log.warning("sufficient conditions not met for %s channel %d: %s", entry["machine"], entry["channel"], entry)
    records = []
    for i, m in enumerate(cfg.machines):
        channels = resolve_channels(cfg, i)
        t0 = time.perf_counter()
        try:
            times = encode_machine(y, channels)
        except TempusError as exc:
            raise type(exc)(f"machine {m.name!r}: {exc}") from exc
        res = _solve(cfg, signal, channels, times, cfg.solver.eta, cfg.solver.rng_seed)
        ms = (time.perf_counter() - t0) * 1e3 if timing else None
        records.append(_record(0, 0.0, m.name, signal, res, ms))
    return records


def _trial_unit(args):
    cfg, signal, clean, channels_all, trial, timing = args
    out = []
    seed = cfg.seed + trial
    for sigma in cfg.noise.sigmas:
        for i, m in enumerate(cfg.machines):
            channels = channels_all[i]
            t0 = time.perf_counter()
            try:
                times = [add_jitter(tr, sigma, [seed, i, j]) for j, tr in enumerate(clean[i])]
                eta = cfg.solver.eta if sigma == 0 else noise_eta(channels, times, sigma)
                if sigma > 0 and cfg.solver.eta is not None:
                    eta = max(eta, cfg.solver.eta)
                res = _solve(cfg, signal, channels, times, eta, seed)
                ms = (time.perf_counter() - t0) * 1e3 if timing else None
                out.append(_record(trial, sigma, m.name, signal, res, ms))
            except (TempusError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                log.info("trial %d sigma %g machine %s failed: %s", trial, sigma, m.name, exc)
                ms = (time.perf_counter() - t0) * 1e3 if timing else None
                out.append(_failed(trial, sigma, m.name, signal, ms))
    return out


def run_jitter_sweep(cfg: RunConfig, jobs: int = 1, timing: bool = False) -> List[TrialRecord]:
    """trials x sigmas x machines records ordered by (sigma, trial, machine).

    Each machine encodes the fixed signal once; every trial perturbs those
    trigger times with its own seeded jitter.  A trial that raises is
    recorded with ``converged=False`` and NaN error fields.
    """
    signal = build_signal(cfg)
    y = filtered_signal(signal, build_kernel(cfg))
    channels_all = [resolve_channels(cfg, i) for i in range(len(cfg.machines))]
    clean = [encode_machine(y, ch) for ch in channels_all]
    units = [(cfg, signal, clean, channels_all, t, timing) for t in range(cfg.noise.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_trial_unit, units))
    else:
        chunks = [_trial_unit(u) for u in units]
    sig_idx = {s: k for k, s in enumerate(cfg.noise.sigmas)}
    mach_idx = {m.name: k for k, m in enumerate(cfg.machines)}
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (sig_idx[r.sigma], r.trial, mach_idx[r.machine]))
    return records


def summarize(records: Sequence[TrialRecord]) -> List[dict]:
    """Mean, standard deviation and median NMSE per (sigma, machine), in first-seen order."""
    groups = {}
    for r in records:
        groups.setdefault((r.sigma, r.machine), []).append(r)
    out = []
    for (sigma, machine), rs in groups.items():
        v = np.array([r.nmse for r in rs], dtype=float)
        ok = v[np.isfinite(v)]
        out.append(
            {
                "sigma": sigma,
                "machine": machine,
                "trials": len(rs),
                "failed": int(v.size - ok.size),
                "converged": int(sum(r.converged for r in rs)),
                "nmse_mean": float(ok.mean()) if ok.size else math.nan,
                "nmse_std": float(ok.std()) if ok.size else math.nan,
                "nmse_median": float(np.median(ok)) if ok.size else math.nan,
            }
        )
    return out
