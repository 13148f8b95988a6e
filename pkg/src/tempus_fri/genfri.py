"""
Joint denoising and annihilation for time-encoded measurements.

Solves

    minimise |G xhat - y|^2   s.t.  (Gamma_K xhat) h = 0,  <h, h0> = 1

by alternating between the two equality-constrained least-squares
subproblems, each written as one square KKT system.  Random complex
initial filters h0 are restarted until the residual drops below ``eta``.
For pulse signals the unknown is the SWCE part s = xhat / (phihat/T), so
annihilation is imposed where it actually holds.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DegenerateFilterError, SingularSystemError
from .numerics import lstsq, poly_roots, right_dual, solve_linear, toeplitz_matrix
from .reconstruction import (
    AnnihilatingFilter,
    ForwardSystem,
    ReconstructionResult,
    recover_amplitudes,
    roots_to_shifts,
)
from .signal_model import Dirac, FourierVector, PulseDescriptor, pulse_spectrum

__all__ = ["GenfriOptions", "genfri_tem", "x_update", "h_update"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenfriOptions:
    """Stopping rule and restart budget.

    ``eta`` is an absolute threshold on |G xhat - y|^2; ``None`` means
    ``1e-12 * |y|^2``.  ``max_restarts`` counts attempts, each with a
    fresh h0 drawn from the stream ``(rng_seed, attempt)``.
    """

    eta: Optional[float] = None
    max_iters: int = 50
    max_restarts: int = 50
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1 or self.max_restarts < 1:
            raise ValueError("max_iters and max_restarts must be at least 1")


def x_update(GhG, Ghy, h):
    """xhat minimising |G xhat - y|^2 subject to (zeta h) xhat = 0."""
    N = GhG.shape[0]
    R = right_dual(h, N)
    p = R.shape[0]
    A = np.block([[GhG, R.conj().T], [R, np.zeros((p, p))]])
    rhs = np.concatenate([Ghy, np.zeros(p, dtype=complex)])
    return solve_linear(A, rhs)[:N]


def h_update(GhG, Gamma_beta, h_prev, h0):
    """Filter update with Psi frozen at the previous filter.

    Unknowns are stacked as [h, alpha, xi, lambda]; only h is returned.
    """
    N = GhG.shape[0]
    K1 = Gamma_beta.shape[1]
    R = right_dual(h_prev, N)
    p = R.shape[0]
    Z = np.zeros
    A = np.block(
        [
            [Z((K1, K1)), Gamma_beta.conj().T, Z((K1, N)), h0[:, None]],
            [Gamma_beta, Z((p, p)), -R, Z((p, 1))],
            [Z((N, K1)), -R.conj().T, GhG, Z((N, 1))],
            [h0.conj()[None, :], Z((1, p)), Z((1, N)), Z((1, 1))],
        ]
    )
    rhs = np.zeros(A.shape[0], dtype=complex)
    rhs[-1] = 1.0
    return solve_linear(A, rhs)[:K1]


def _initial_filter(rng_seed, attempt, K):
    rng = np.random.default_rng([int(rng_seed), int(attempt)])
    return rng.standard_normal(K + 1) + 1j * rng.standard_normal(K + 1)


def genfri_tem(
    system: ForwardSystem,
    K: int,
    opts: Optional[GenfriOptions] = None,
    pulse: PulseDescriptor = None,
) -> ReconstructionResult:
    """Recover shifts and amplitudes from a (possibly noisy) forward system.

    The lowest-residual iterate over all attempts is kept.  If no attempt
    reaches ``eta`` the result is returned with ``converged=False``.
    """
    opts = GenfriOptions() if opts is None else opts
    pulse = Dirac() if pulse is None else pulse
    M, T = system.M, system.period_T
    N = 2 * M + 1
    if 2 * M + 1 < 2 * K + 1:
        raise ValueError(f"need M >= K (M={M}, K={K})")

    w = pulse_spectrum(pulse, np.arange(-M, M + 1) * (2.0 * np.pi / T)) / T
    G = system.matrix * w[None, :]
    y = system.measurements.astype(complex)
    GhG = G.conj().T @ G
    Ghy = G.conj().T @ y
    beta = lstsq(GhG, Ghy)
    Gamma_beta = toeplitz_matrix(beta, K)
    ynorm2 = float(np.vdot(y, y).real)
    eta = 1e-12 * ynorm2 if opts.eta is None else opts.eta

    best = None  # (residual, s, h, iterations, attempt)
    converged = False
    attempts = 0
    for attempt in range(opts.max_restarts):
        attempts = attempt + 1
        h0 = _initial_filter(opts.rng_seed, attempt, K)
        h = h0
        try:
            for it in range(1, opts.max_iters + 1):
                s = x_update(GhG, Ghy, h)
                r = G @ s - y
                resid = float(np.vdot(r, r).real)
                h = h_update(GhG, Gamma_beta, h, h0)
                if best is None or resid < best[0]:
                    best = (resid, s, h, it, attempt)
                if resid <= eta:
                    converged = True
                    break
        except SingularSystemError:
            log.debug("singular KKT system in attempt %d; restarting", attempt)
            continue
        if converged:
            break

    if best is None:
        raise SingularSystemError("every GenFRI-TEM attempt hit a singular system")
    resid, s, h, iters, _ = best
    xhat = FourierVector(w * s, T)
    try:
        tau = roots_to_shifts(poly_roots(h), T)
    except DegenerateFilterError:
        # root at infinity; drop the vanishing leading tap
        hh = h[np.argmax(np.abs(h) > 1e-12 * np.linalg.norm(h)) :]
        tau = roots_to_shifts(poly_roots(hh), T)
        tau = np.sort(np.concatenate([tau, np.zeros(K - tau.size)]))
    c = recover_amplitudes(xhat, tau, pulse)
    return ReconstructionResult(
        shifts=tau,
        amplitudes=c,
        fourier=xhat,
        residual=float(np.sqrt(resid)),
        iterations_used=iters,
        restarts_used=attempts,
        converged=converged,
        filter=AnnihilatingFilter(h),
    )
