"""
Forward systems y = G xhat for crossing and integrate-and-fire encodings,
Fourier-coefficient recovery, Prony's annihilating-filter method and
amplitude regression.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    CoincidentShiftError,
    ConfigurationError,
    DegeneratePulseError,
    InsufficientMeasurementsError,
)
from .numerics import lstsq, nullspace_min_singular, poly_roots, toeplitz_matrix
from .signal_model import Dirac, FourierVector, PulseDescriptor, pulse_spectrum
from .tem import Machine, MeasurementVector, TriggerSet

__all__ = [
    "Provenance",
    "ForwardSystem",
    "AnnihilatingFilter",
    "ReconstructionResult",
    "build_gct",
    "build_gif",
    "build_gif_factors",
    "forward_system",
    "stack_channels",
    "recover_fourier",
    "swce_part",
    "prony_shifts",
    "roots_to_shifts",
    "recover_amplitudes",
    "nmse_shifts",
    "decode",
]

log = logging.getLogger(__name__)

PHI_CUTOFF = 1e-12


class Provenance(str, enum.Enum):
    CTEM = "ctem"
    IFTEM = "iftem"
    STACK = "multichannel"


@dataclass(frozen=True)
class ForwardSystem:
    matrix: np.ndarray
    measurements: np.ndarray
    M: int
    period_T: float
    provenance: Provenance
    duplicate_rows: tuple = ()

    def __post_init__(self):
        G = np.array(self.matrix, dtype=complex)
        y = np.array(self.measurements, dtype=float)
        if G.ndim != 2 or G.shape[1] != 2 * self.M + 1:
            raise ValueError(f"matrix must have 2M+1 = {2 * self.M + 1} columns, got {G.shape}")
        if y.shape != (G.shape[0],):
            raise ValueError("one measurement per matrix row required")
        G.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "matrix", G)
        object.__setattr__(self, "measurements", y)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def rows(self):
        return self.matrix.shape[0]

    @property
    def cols(self):
        return self.matrix.shape[1]

    def rank(self):
        s = np.linalg.svd(self.matrix, compute_uv=False)
        if s.size == 0:
            return 0
        return int(np.sum(s > max(self.matrix.shape) * np.finfo(float).eps * s[0]))

    __hash__ = None


@dataclass(frozen=True)
class AnnihilatingFilter:
    coeffs: np.ndarray

    def __post_init__(self):
        h = np.array(self.coeffs, dtype=complex)
        if h.ndim != 1 or h.size < 2 or not np.linalg.norm(h) > 0:
            raise ValueError("annihilating filter needs K+1 >= 2 coefficients, not all zero")
        h.setflags(write=False)
        object.__setattr__(self, "coeffs", h)

    @property
    def K(self):
        return self.coeffs.size - 1

    def is_regular(self, tol=1e-12):
        """True when neither h_0 nor h_K vanishes (no roots at 0 or infinity)."""
        n = np.linalg.norm(self.coeffs)
        return abs(self.coeffs[0]) > tol * n and abs(self.coeffs[-1]) > tol * n

    def roots(self):
        return poly_roots(self.coeffs)

    __hash__ = None


@dataclass
class ReconstructionResult:
    shifts: np.ndarray
    amplitudes: np.ndarray
    fourier: FourierVector
    residual: float
    iterations_used: int = 0
    restarts_used: int = 0
    converged: bool = True
    filter: Optional[AnnihilatingFilter] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "shifts": [float(v) for v in self.shifts],
            "amplitudes": [float(v) for v in self.amplitudes],
            "residual": float(self.residual),
            "iterations": int(self.iterations_used),
            "restarts": int(self.restarts_used),
            "converged": bool(self.converged),
        }


def _harmonics(M):
    return np.arange(-M, M + 1)


def build_gct(times: TriggerSet, M: int) -> np.ndarray:
    """L x (2M+1) matrix with rows exp(j w0 m t_n), m = -M..M."""
    t = np.asarray(times.times)
    w0 = 2.0 * np.pi / times.period_T
    return np.exp(1j * w0 * np.outer(t, _harmonics(M)))


def build_gif_factors(times: TriggerSet, M: int):
    """Forward-difference matrix D and antiderivative matrix Gt with G_IF = D @ Gt.

    Gt has columns exp(j w0 m t) / (j w0 m) for m != 0 and t for m = 0,
    i.e. it samples an antiderivative of each basis function.
    """
    t = np.asarray(times.times)
    L = t.size
    w0 = 2.0 * np.pi / times.period_T
    m = _harmonics(M)
    Gt = np.empty((L, 2 * M + 1), dtype=complex)
    nz = m != 0
    Gt[:, nz] = np.exp(1j * w0 * np.outer(t, m[nz])) / (1j * w0 * m[nz])
    Gt[:, M] = t
    D = np.eye(L - 1, L, k=1) - np.eye(L - 1, L)
    return D, Gt


def build_gif(times: TriggerSet, M: int) -> np.ndarray:
    """(L-1) x (2M+1) matrix mapping xhat to the local integrals over [t_n, t_{n+1}].

    Column m != 0 carries the 1/(j w0 m) factor of the antiderivative, so
    G_IF @ xhat reproduces the integrals exactly; the m = 0 column holds
    the gaps.
    """
    t = np.asarray(times.times)
    if t.size < 2:
        raise ValueError("G_IF needs at least two trigger times")
    w0 = 2.0 * np.pi / times.period_T
    m = _harmonics(M)
    G = np.empty((t.size - 1, 2 * M + 1), dtype=complex)
    nz = m != 0
    jwm = 1j * w0 * m[nz]
    t0 = t[:-1]
    G[:, nz] = np.exp(np.outer(t0, jwm)) * np.expm1(np.outer(np.diff(t), jwm)) / jwm
    G[:, M] = np.diff(t)
    return G


def forward_system(times: TriggerSet, measurements: MeasurementVector, M: int) -> ForwardSystem:
    if times.machine is Machine.CROSSING:
        G, prov = build_gct(times, M), Provenance.CTEM
    else:
        G, prov = build_gif(times, M), Provenance.IFTEM
    return ForwardSystem(G, measurements.values, M, times.period_T, prov)


def _duplicate_rows(G, tol=1e-12):
    dups = []
    for i, j in itertools.combinations(range(G.shape[0]), 2):
        if np.linalg.norm(G[i] - G[j]) <= tol * max(1.0, np.linalg.norm(G[i])):
            dups.append((i, j))
    return tuple(dups)


def stack_channels(systems: Sequence[ForwardSystem]) -> ForwardSystem:
    """Concatenate per-channel systems into one (rows add up, columns shared)."""
    systems = list(systems)
    if not systems:
        raise ConfigurationError("nothing to stack")
    if len(systems) == 1:
        return systems[0]
    M, T = systems[0].M, systems[0].period_T
    for s in systems[1:]:
        if s.M != M or not math.isclose(s.period_T, T, rel_tol=1e-12):
            raise ConfigurationError("all channels must share M and the period")
    G = np.vstack([s.matrix for s in systems])
    y = np.concatenate([s.measurements for s in systems])
    dups = _duplicate_rows(G)
    out = ForwardSystem(G, y, M, T, Provenance.STACK, duplicate_rows=dups)
    if dups:
        log.warning("stacked system has %d duplicated row pair(s): %s", len(dups), dups)
    if out.rows >= out.cols and out.rank() < out.cols:
        log.warning("stacked system is rank deficient (rank %d < %d)", out.rank(), out.cols)
    return out


def recover_fourier(system: ForwardSystem) -> FourierVector:
    """Least-squares solution of G xhat = y.

    Raises
    ------
    InsufficientMeasurementsError
        When the system has fewer rows than the 2M+1 unknowns; the
        exception carries the deficit.
    """
    if system.rows < system.cols:
        raise InsufficientMeasurementsError(system.rows, system.cols)
    x = lstsq(system.matrix, system.measurements.astype(complex))
    return FourierVector(x, system.period_T)


def _pulse_weights(pulse, M, T):
    """phihat(m w0) / T for m = -M..M."""
    return pulse_spectrum(pulse, _harmonics(M) * (2.0 * np.pi / T)) / T


def swce_part(xhat: FourierVector, pulse: PulseDescriptor = None) -> FourierVector:
    """Divide out phihat(m w0)/T, leaving sum_k c_k exp(-j w0 m tau_k).

    Harmonics are trimmed symmetrically to the largest contiguous band
    around m = 0 where |phihat| stays above 1e-12 of its peak.
    """
    pulse = Dirac() if pulse is None else pulse
    M, T = xhat.M, xhat.period_T
    w = _pulse_weights(pulse, M, T)
    mag = np.abs(w)
    ok = mag >= PHI_CUTOFF * mag.max()
    Mk = 0
    while Mk < M and ok[M - Mk - 1] and ok[M + Mk + 1]:
        Mk += 1
    if not ok[M]:
        raise DegeneratePulseError("pulse spectrum vanishes at DC")
    sl = slice(M - Mk, M + Mk + 1)
    return FourierVector(xhat.coeffs[sl] / w[sl], T)


def roots_to_shifts(roots, T):
    """tau = -T arg(root) / (2 pi) mod T, sorted.  Magnitudes are ignored."""
    tau = np.mod(-T * np.angle(roots) / (2.0 * np.pi), T)
    tau = np.where(tau >= T, 0.0, tau)
    return np.sort(tau)


def prony_shifts(xhat: FourierVector, K: int, pulse: PulseDescriptor = None):
    """Annihilating filter and shifts from 2K+1 or more Fourier coefficients.

    Returns ``(filter, shifts)`` with shifts sorted ascending in [0, T).
    """
    s = swce_part(xhat, pulse)
    if s.N < 2 * K + 1:
        raise ValueError(f"Prony needs 2K+1 = {2 * K + 1} contiguous coefficients, have {s.N}")
    nv = nullspace_min_singular(toeplitz_matrix(s.coeffs, K))
    if nv.sigma_next - nv.sigma_min <= 1e-8 * nv.sigma_max:
        raise CoincidentShiftError(
            "annihilating filter is not unique: the two smallest singular values "
            f"({nv.sigma_min:.3g}, {nv.sigma_next:.3g}) coincide"
        )
    h = AnnihilatingFilter(nv.vector)
    return h, roots_to_shifts(h.roots(), xhat.period_T)


def recover_amplitudes(xhat: FourierVector, shifts, pulse: PulseDescriptor = None):
    """Least-squares amplitudes given the shifts (real part of the complex fit)."""
    pulse = Dirac() if pulse is None else pulse
    M, T = xhat.M, xhat.period_T
    m = _harmonics(M)
    w = _pulse_weights(pulse, M, T)
    keep = np.abs(w) >= PHI_CUTOFF * np.abs(w).max() if np.abs(w).max() > 0 else np.zeros(m.size, bool)
    if not keep.any():
        raise DegeneratePulseError("pulse spectrum vanishes on every retained harmonic")
    A = w[keep, None] * np.exp(-1j * (2.0 * np.pi / T) * np.outer(m[keep], shifts))
    c = lstsq(A, xhat.coeffs[keep])
    imag = np.abs(c.imag).max() if c.size else 0.0
    if imag > 1e-8 * max(1.0, np.abs(c).max()):
        log.debug("amplitude fit has imaginary residue %.3g (model mismatch or noise)", imag)
    return c.real


def _circ_dist(a, b, T):
    d = np.abs(a - b) % T
    return np.minimum(d, T - d)


def nmse_shifts(true_shifts, est_shifts, T=1.0):
    """sum (tau - tau_est)^2 / sum tau^2 with circular matching.

    Both lists are sorted; the estimate is rotated cyclically to the
    alignment with the least total squared circular distance.
    """
    a = np.sort(np.asarray(true_shifts, dtype=float))
    b = np.sort(np.asarray(est_shifts, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} true vs {b.size} estimated shifts")
    if a.size == 0:
        return 0.0
    best = min(np.sum(_circ_dist(a, np.roll(b, r), T) ** 2) for r in range(a.size))
    return float(best / np.sum(a**2))


def decode(system: ForwardSystem, K: int, pulse: PulseDescriptor = None) -> ReconstructionResult:
    """Direct decoder: least squares for xhat, then Prony and amplitude regression."""
    xhat = recover_fourier(system)
    h, tau = prony_shifts(xhat, K, pulse)
    c = recover_amplitudes(xhat, tau, pulse)
    res = float(np.linalg.norm(system.matrix @ xhat.coeffs - system.measurements))
    return ReconstructionResult(tau, c, xhat, res, filter=h)
