"""
Periodic finite-rate-of-innovation signals and their Fourier-domain view.

A T-periodic FRI signal is a sum of K weighted, shifted copies of a known
pulse.  After filtering with an alias-cancelling kernel that keeps the
harmonics |m| <= M, the signal seen by a time-encoding machine is the
trigonometric polynomial

    y(t) = sum_{m=-M}^{M} g_m xhat_m exp(j w0 m t),    w0 = 2 pi / T,

so everything downstream (samples, local integrals) is closed form.
Coefficient vectors are stored with index ``i = m + M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .exceptions import ConfigurationError, SpectrumCoverageError

__all__ = [
    "Dirac",
    "BSpline",
    "TabulatedSpectrum",
    "PulseDescriptor",
    "FriSignal",
    "SamplingKernel",
    "FourierVector",
    "pulse_spectrum",
    "fourier_coefficients",
    "filtered_signal",
    "eval_trig",
    "integral_trig",
    "sup_norm",
]

# below this |w/(2a)| the sinc power switches to its Taylor series
_SINC_TAYLOR_CUTOFF = 1e-6
SUP_GRID = 16384


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dirac:
    """Dirac impulse, flat spectrum."""


@dataclass(frozen=True)
class BSpline:
    """Centred B-spline of the given degree, compressed in time: beta^n(a t)."""

    degree: int = 3
    time_scale: float = 1.0

    def __post_init__(self):
        if int(self.degree) != self.degree or self.degree < 0:
            raise ConfigurationError(f"B-spline degree must be a nonnegative integer, got {self.degree}")
        if not self.time_scale > 0:
            raise ConfigurationError(f"B-spline time_scale must be positive, got {self.time_scale}")

    @property
    def support(self):
        """Half-width of the support in seconds."""
        return (self.degree + 1) / (2.0 * self.time_scale)


@dataclass(frozen=True)
class TabulatedSpectrum:
    """Pulse known only through its spectrum samples phihat(m w0)."""

    values: Mapping[int, complex]
    period_T: float

    def __post_init__(self):
        if not self.period_T > 0:
            raise ConfigurationError("period_T must be positive")
        table = {int(m): complex(v) for m, v in self.values.items()}
        for m, v in table.items():
            if -m in table and abs(table[-m] - np.conj(v)) > 1e-12 * max(1.0, abs(v)):
                raise ConfigurationError(f"tabulated spectrum is not conjugate symmetric at m={m}")
        object.__setattr__(self, "values", table)

    def covers(self, M):
        return all(m in self.values for m in range(-M, M + 1))


PulseDescriptor = Union[Dirac, BSpline, TabulatedSpectrum]


def pulse_spectrum(pulse: PulseDescriptor, omega):
    """Fourier transform of the pulse at angular frequency ``omega``.

    Accepts a scalar or an array of frequencies and returns complex values
    of the same shape.
    """
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ValueError("omega must be finite")

    if isinstance(pulse, Dirac):
        out = np.ones(omega.shape, dtype=complex)
    elif isinstance(pulse, BSpline):
        a = float(pulse.time_scale)
        x = omega / (2.0 * a)
        small = np.abs(x) < _SINC_TAYLOR_CUTOFF
        safe = np.where(small, 1.0, x)
        sinc = np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)
        out = (sinc ** (pulse.degree + 1) / a).astype(complex)
    elif isinstance(pulse, TabulatedSpectrum):
        w0 = 2.0 * np.pi / pulse.period_T
        flat = omega.ravel()
        out = np.empty(flat.shape, dtype=complex)
        for i, w in enumerate(flat):
            m = int(round(w / w0))
            if abs(w - m * w0) > 1e-9 * w0 or m not in pulse.values:
                raise SpectrumCoverageError(f"tabulated spectrum has no entry for omega={w!r} (m={w / w0:.6g})")
            out[i] = pulse.values[m]
        out = out.reshape(omega.shape)
    else:
        raise TypeError(f"unknown pulse descriptor {pulse!r}")
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class FriSignal:
    period_T: float
    pulse: PulseDescriptor
    amplitudes: np.ndarray
    shifts: np.ndarray

    def __post_init__(self):
        c = _frozen(self.amplitudes)
        tau = _frozen(self.shifts)
        if not self.period_T > 0:
            raise ConfigurationError(f"period must be positive, got {self.period_T}")
        if c.ndim != 1 or c.shape != tau.shape or c.size < 1:
            raise ConfigurationError("amplitudes and shifts must be 1-D of equal length K >= 1")
        if np.any(tau < 0) or np.any(tau >= self.period_T):
            raise ConfigurationError("shifts must lie in [0, T)")
        if np.unique(tau).size != tau.size:
            raise ConfigurationError("shifts must be pairwise distinct")
        object.__setattr__(self, "amplitudes", c)
        object.__setattr__(self, "shifts", tau)

    @property
    def K(self):
        return self.amplitudes.size

    def __eq__(self, other):
        if not isinstance(other, FriSignal):
            return NotImplemented
        return (
            self.period_T == other.period_T
            and self.pulse == other.pulse
            and np.array_equal(self.amplitudes, other.amplitudes)
            and np.array_equal(self.shifts, other.shifts)
        )

    __hash__ = None


@dataclass(frozen=True)
class SamplingKernel:
    """Alias-cancelling kernel described by its gains on the harmonics |m| <= M."""

    M: int
    period_T: float
    gains: np.ndarray = field(default=None)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 0:
            raise ConfigurationError(f"M must be a nonnegative integer, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        if not self.period_T > 0:
            raise ConfigurationError("period_T must be positive")
        g = np.ones(2 * self.M + 1, dtype=complex) if self.gains is None else np.array(self.gains, dtype=complex)
        if g.shape != (2 * self.M + 1,):
            raise ConfigurationError(f"expected {2 * self.M + 1} gains, got shape {g.shape}")
        if np.any(g == 0):
            raise ConfigurationError("alias cancellation requires g_m != 0 for |m| <= M")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    __hash__ = None


@dataclass(frozen=True)
class FourierVector:
    """Contiguous Fourier coefficients xhat_m, m = -M..M."""

    coeffs: np.ndarray
    period_T: float

    def __post_init__(self):
        c = _frozen(self.coeffs, complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ConfigurationError(f"need an odd number 2M+1 of coefficients, got shape {c.shape}")
        if not self.period_T > 0:
            raise ConfigurationError("period_T must be positive")
        object.__setattr__(self, "coeffs", c)

    @property
    def M(self):
        return (self.coeffs.size - 1) // 2

    @property
    def N(self):
        return self.coeffs.size

    @property
    def omega0(self):
        return 2.0 * np.pi / self.period_T

    @property
    def harmonics(self):
        return np.arange(-self.M, self.M + 1)

    def __getitem__(self, m):
        """Coefficient of harmonic ``m`` (not the storage index)."""
        if abs(m) > self.M:
            raise IndexError(f"harmonic {m} outside [-{self.M}, {self.M}]")
        return self.coeffs[m + self.M]

    def is_conjugate_symmetric(self, tol=1e-12):
        c = self.coeffs
        return bool(np.all(np.abs(c[::-1] - np.conj(c)) <= tol * max(1.0, np.abs(c).max())))

    def __eq__(self, other):
        if not isinstance(other, FourierVector):
            return NotImplemented
        return self.period_T == other.period_T and np.array_equal(self.coeffs, other.coeffs)

    __hash__ = None


def fourier_coefficients(signal: FriSignal, M: int) -> FourierVector:
    """Exact coefficients xhat_m = (1/T) phihat(m w0) sum_k c_k exp(-j w0 m tau_k)."""
    if M < 0:
        raise ValueError("M must be nonnegative")
    T = signal.period_T
    m = np.arange(-M, M + 1)
    w0 = 2.0 * np.pi / T
    phihat = pulse_spectrum(signal.pulse, m * w0)
    swce = np.exp(-1j * w0 * np.outer(m, signal.shifts)) @ signal.amplitudes
    return FourierVector(phihat * swce / T, T)


def filtered_signal(signal: FriSignal, kernel: SamplingKernel) -> FourierVector:
    """Coefficients of y = x * g, the input presented to a time-encoding machine."""
    if not np.isclose(kernel.period_T, signal.period_T, rtol=1e-12, atol=0):
        raise ConfigurationError(
            f"kernel period {kernel.period_T} does not match signal period {signal.period_T}"
        )
    xhat = fourier_coefficients(signal, kernel.M)
    return FourierVector(xhat.coeffs * kernel.gains, signal.period_T)


def eval_trig(coeffs: FourierVector, t):
    """Real part of sum_m xhat_m exp(j w0 m t); scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    phase = np.exp(1j * coeffs.omega0 * np.multiply.outer(t, coeffs.harmonics))
    out = (phase @ coeffs.coeffs).real
    return float(out) if out.ndim == 0 else out


def integral_trig(coeffs: FourierVector, a, b):
    """Exact integral of :func:`eval_trig` over [a, b].

    ``a`` and ``b`` may be arrays of matching shape (one interval each).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(a > b):
        raise ValueError("integral_trig requires a <= b")
    M, w0 = coeffs.M, coeffs.omega0
    m = coeffs.harmonics
    c = coeffs.coeffs
    nz = m != 0
    jwm = 1j * w0 * m[nz]
    # exp(jwb) - exp(jwa) = exp(jwa) (exp(jw(b-a)) - 1); expm1 keeps short intervals accurate
    da = np.multiply.outer(a, jwm)
    dl = np.multiply.outer(b - a, jwm)
    diff = np.exp(da) * np.expm1(dl)
    out = (diff @ (c[nz] / jwm)).real + c[M].real * (b - a)
    return float(out) if out.ndim == 0 else out


def sup_norm(coeffs: FourierVector, grid: int = SUP_GRID) -> float:
    """max |y(t)| over a uniform grid on one period (stand-in for the sup norm)."""
    t = np.arange(grid) * (coeffs.period_T / grid)
    # inverse FFT evaluates the polynomial on the uniform grid exactly
    buf = np.zeros(grid, dtype=complex)
    M = coeffs.M
    if 2 * M + 1 > grid:
        return float(np.abs(eval_trig(coeffs, t)).max())
    buf[: M + 1] = coeffs.coeffs[M:]
    if M:
        buf[-M:] = coeffs.coeffs[:M]
    vals = np.fft.ifft(buf) * grid
    return float(np.abs(vals.real).max())
