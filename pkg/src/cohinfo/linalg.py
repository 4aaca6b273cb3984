"""Dense complex matrix helpers and Hermitian eigendecomposition."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

MAX_DIM = 64

HERMITIAN_RTOL = 1e-6


class EigenDecomposition(NamedTuple):
    """Eigenvalues sorted descending with matching unit-norm eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or 0 in m.shape:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def kron(a, b, max_dim: int = MAX_DIM) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    rows, cols = a.shape[0] * b.shape[0], a.shape[1] * b.shape[1]
    if max(rows, cols) > max_dim:
        raise ValueError(f"kron result {rows}x{cols} exceeds maximum dimension {max_dim}")
    return np.kron(a, b)


def adjoint(a) -> np.ndarray:
    return as_matrix(a).conj().T


def hermitian_eig(a) -> EigenDecomposition:
    """Eigendecomposition of a (numerically) Hermitian matrix.

    The input is symmetrized as (A + A^H)/2 first, and rejected only when
    ``||A - A^H||_F > 1e-6 ||A||_F``.
    """
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    skew = np.linalg.norm(a - a.conj().T)
    if skew > HERMITIAN_RTOL * np.linalg.norm(a):
        raise ValueError(f"matrix is not Hermitian (||A - A^H||_F = {skew:.3e})")
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    return EigenDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def hermitian_eigvals(a) -> np.ndarray:
    """Eigenvalues only, descending. Same validation as :func:`hermitian_eig`."""
    a = as_matrix(a)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    skew = np.linalg.norm(a - a.conj().T)
    if skew > HERMITIAN_RTOL * np.linalg.norm(a):
        raise ValueError(f"matrix is not Hermitian (||A - A^H||_F = {skew:.3e})")
    return np.linalg.eigvalsh(0.5 * (a + a.conj().T))[::-1]


def hermitian_function(a, fn) -> np.ndarray:
    """Apply a scalar function to the spectrum of a Hermitian matrix."""
    w, v = hermitian_eig(a)
    return (v * fn(w)) @ v.conj().T


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from QR of a complex Gaussian matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases
