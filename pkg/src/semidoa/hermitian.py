#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Hermitian linear-algebra helpers

Vectorization operators (vec / vecd), the selection matrix P, the projector
onto the orthogonal complement of vec(I_N), Hermitian eigendecomposition and
Hermitian square roots. Matrices are plain numpy arrays; nothing here holds
state.
"""

import logging
from typing import Tuple

import numpy as np

from .exceptions import DomainError, NumericalError, PositiveDefinitenessError

logger = logging.getLogger(__name__)

# Relative threshold (times the largest eigenvalue) below which a matrix is not PD
PD_RTOL = 1e-12

# Hermitian symmetry check tolerance, relative to the Frobenius norm
HERMITIAN_RTOL = 1e-10


def _require_square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"Expected a square matrix, got shape {A.shape}")
    return A


def vec(A: np.ndarray) -> np.ndarray:
    """Column-major stacking of a square matrix"""
    A = _require_square(A)
    return A.reshape(-1, order="F")


def vecd(A: np.ndarray) -> np.ndarray:
    """vec(A) with its first entry (A[0, 0]) removed"""
    return vec(A)[1:]


def unvecd(v: np.ndarray, a11: complex = 1.0) -> np.ndarray:
    """Rebuild the square matrix whose vecd is `v` and whose top-left entry is `a11`"""
    v = np.asarray(v)
    n = int(round(np.sqrt(v.size + 1)))
    if n * n - 1 != v.size:
        raise DomainError(f"Length {v.size} is not N^2 - 1 for any integer N")
    full = np.concatenate(([a11], v)).astype(np.result_type(v, a11, np.float64))
    return full.reshape((n, n), order="F")


def selection_matrix(n: int) -> np.ndarray:
    """Dense P = [e_2 | ... | e_{N^2}]^T, shape (N^2 - 1, N^2)

    Only tests use the dense form; runtime code slices with vecd instead.
    """
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    return np.eye(n * n)[1:, :]


def perp_projector(n: int) -> np.ndarray:
    """Dense I_{N^2} - N^{-1} vec(I_N) vec(I_N)^T"""
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    e = vec(np.eye(n))
    return np.eye(n * n) - np.outer(e, e) / n


def apply_perp_projector(x: np.ndarray, n: int) -> np.ndarray:
    """Rank-one-update form of perp_projector(n) @ x"""
    x = np.asarray(x)
    e = vec(np.eye(n))
    return x - e * (e @ x) / n


def hermitian_part(A: np.ndarray) -> np.ndarray:
    A = _require_square(A)
    return 0.5 * (A + A.conj().T)


def is_hermitian(A: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    A = _require_square(A)
    scale = max(np.linalg.norm(A), 1.0)
    return bool(np.linalg.norm(A - A.conj().T) <= rtol * scale)


def hermitian_eig(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) of a Hermitian matrix

    Repeated eigenvalues come back with an arbitrary orthonormal basis of
    their eigenspace; callers must only rely on the spanned subspaces.
    """
    A = _require_square(A)
    if not is_hermitian(A):
        raise DomainError("Matrix is not Hermitian")
    try:
        eigenvalues, eigenvectors = np.linalg.eigh(hermitian_part(A))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Hermitian eigensolver failed: {e}") from e
    return eigenvalues, eigenvectors


def is_positive_definite(A: np.ndarray, rtol: float = PD_RTOL) -> bool:
    eigenvalues, _ = hermitian_eig(A)
    return bool(eigenvalues[0] > rtol * max(eigenvalues[-1], 0.0) and eigenvalues[-1] > 0)


def hermitian_sqrt_inv(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return (A^{1/2}, A^{-1/2}) for a Hermitian positive-definite A

    Both factors are Hermitian, so transpose(A^{-1/2}) == conj(A^{-1/2}).
    """
    eigenvalues, eigenvectors = hermitian_eig(A)
    largest = eigenvalues[-1]
    if largest <= 0 or eigenvalues[0] <= PD_RTOL * largest:
        raise PositiveDefinitenessError(
            f"Matrix is not positive definite (smallest eigenvalue {eigenvalues[0]:.3e}, "
            f"largest {largest:.3e})"
        )
    root = np.sqrt(eigenvalues)
    sqrt_a = (eigenvectors * root) @ eigenvectors.conj().T
    inv_sqrt_a = (eigenvectors / root) @ eigenvectors.conj().T
    return hermitian_part(sqrt_a), hermitian_part(inv_sqrt_a)


def kron(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Kronecker product; vec(B X A^T) == kron(A, B) @ vec(X)"""
    return np.kron(A, B)
