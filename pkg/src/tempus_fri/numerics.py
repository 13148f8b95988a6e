"""
Dense linear-algebra helpers: Toeplitz embedding and its right dual,
SVD-based least squares and null vectors, pivoted solves, and polynomial
roots through the companion matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .exceptions import DegenerateFilterError, SingularSystemError
from .signal_model import FourierVector

__all__ = [
    "ToeplitzEmbedding",
    "NullVector",
    "toeplitzify",
    "toeplitz_matrix",
    "right_dual",
    "lstsq",
    "nullspace_min_singular",
    "poly_roots",
    "solve_linear",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class ToeplitzEmbedding:
    generator: FourierVector
    order_P: int
    matrix: np.ndarray

    __hash__ = None


def toeplitz_matrix(x, P):
    """(N-P) x (P+1) Toeplitz matrix with entry (i, j) = x[P + i - j] (0-based).

    Row i holds the valid part of the convolution at lag P + i.
    """
    x = np.asarray(x)
    N = x.size
    if not 0 <= P <= N - 1:
        raise ValueError(f"order P={P} out of range for generator of length {N}")
    return sla.toeplitz(x[P:], x[P::-1])


def toeplitzify(x: FourierVector, P: int) -> ToeplitzEmbedding:
    if not 0 <= P <= x.M:
        raise ValueError(f"order P={P} must satisfy 0 <= P <= M={x.M}")
    T = toeplitz_matrix(x.coeffs, P)
    T.setflags(write=False)
    return ToeplitzEmbedding(x, P, T)


def right_dual(u, N):
    """Banded (N-P) x N matrix Z with toeplitz_matrix(x, P) @ u == Z @ x for every x."""
    u = np.asarray(u)
    if u.ndim != 1 or u.size < 1:
        raise ValueError("filter must be a non-empty vector")
    P = u.size - 1
    if N < P + 1:
        raise ValueError(f"need N >= P+1, got N={N}, P={P}")
    Z = np.zeros((N - P, N), dtype=np.result_type(u, float))
    rev = u[::-1]
    for i in range(N - P):
        Z[i, i : i + P + 1] = rev
    return Z


def lstsq(A, b):
    """Minimum-norm least-squares solution with an SVD cutoff of rows * eps * sigma_max."""
    A = np.asarray(A)
    x, *_ = np.linalg.lstsq(A, b, rcond=A.shape[0] * _EPS)
    return x


class NullVector(NamedTuple):
    vector: np.ndarray
    sigma_min: float
    sigma_next: float
    sigma_max: float


def nullspace_min_singular(A) -> NullVector:
    """Right singular vector of the smallest singular value (unit norm).

    Singular values are padded with zeros when ``A`` has fewer rows than
    columns, so a wide matrix always reports ``sigma_min == 0``.
    """
    A = np.asarray(A)
    rows, cols = A.shape
    if cols < 1:
        raise ValueError("matrix must have at least one column")
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    s = np.concatenate([s, np.zeros(cols - s.size)])
    v = Vh[-1].conj()
    nxt = s[-2] if cols > 1 else np.inf
    return NullVector(v, float(s[-1]), float(nxt), float(s[0]) if s.size else 0.0)


def poly_roots(h):
    """Roots of h[0] z^K + h[1] z^(K-1) + ... + h[K].

    These are the zeros of H(z) = sum_k h_k z^-k.  Computed as eigenvalues
    of the companion matrix of the monic normalisation.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim != 1 or h.size < 1:
        raise ValueError("coefficient vector must be 1-D and non-empty")
    norm = np.linalg.norm(h)
    if norm == 0 or abs(h[0]) <= 1e-12 * norm:
        raise DegenerateFilterError("leading filter coefficient vanishes")
    if h.size == 1:
        return np.empty(0, dtype=complex)
    C = sla.companion(h / h[0])
    return np.linalg.eigvals(C)


def solve_linear(A, b, full_output=False):
    """Solve a square system by LU with partial pivoting.

    Falls back to :func:`lstsq` when the LU solution misses the residual
    target ``1e-9 * |b|``.  With ``full_output`` returns ``(x, used_lstsq)``.

    Raises
    ------
    SingularSystemError
        If a pivot is exactly zero.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"solve_linear needs a square matrix, got {A.shape}")
    dtype = np.result_type(A, b, float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A.astype(dtype), check_finite=True, overwrite_a=True)
    if np.any(np.diag(lu) == 0):
        raise SingularSystemError("matrix is exactly singular after pivoting")
    x = sla.lu_solve((lu, piv), b.astype(dtype))
    used_lstsq = False
    bnorm = np.linalg.norm(b)
    if not np.all(np.isfinite(x)) or np.linalg.norm(A @ x - b) > 1e-9 * bnorm:
        x = lstsq(A, b)
        used_lstsq = True
    return (x, used_lstsq) if full_output else x
