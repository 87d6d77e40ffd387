#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Array geometry and structured snapshot covariance

ULA steering vectors a(nu) = (1, e^{j2pi nu}, ..., e^{j2pi(N-1)nu})^T, their
derivatives, and Sigma(theta) = A Gamma A^H + sigma^2 I.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .exceptions import DomainError
from .hermitian import hermitian_part
from .models import ShapeMatrix, SourceScene, wrap_frequency

logger = logging.getLogger(__name__)

SUPPORTED_GEOMETRIES = ("ula",)


@dataclass(frozen=True)
class SteeringModel:
    """Array response model; only the uniform linear array is implemented"""

    n_sensors: int
    geometry: str = "ula"

    def __post_init__(self):
        if self.n_sensors < 2:
            raise DomainError(f"array needs at least 2 sensors, got {self.n_sensors}")
        if self.geometry not in SUPPORTED_GEOMETRIES:
            raise DomainError(f"unsupported array geometry: {self.geometry!r}")

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.n_sensors, dtype=float)

    def _phases(self, nu) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        if not np.all(np.isfinite(nu)):
            raise DomainError("spatial frequency must be finite")
        # wrapping first makes a(nu + 1) == a(nu) hold bit for bit on exact inputs
        return 2.0 * np.pi * np.multiply.outer(self.positions, wrap_frequency(nu))

    def steering_vector(self, nu: float) -> np.ndarray:
        return np.exp(1j * self._phases(float(nu)))

    def steering_derivative(self, nu: float) -> np.ndarray:
        """d a(nu) / d nu, element n = j 2 pi n exp(j 2 pi n nu)"""
        return 1j * 2.0 * np.pi * self.positions * self.steering_vector(nu)

    def steering_matrix(self, nu) -> np.ndarray:
        """N x K matrix whose k-th column is a(nu_k)"""
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        return np.exp(1j * self._phases(nu))

    def derivative_matrix(self, nu) -> np.ndarray:
        """N x K matrix whose k-th column is d a(nu_k) / d nu_k"""
        return 1j * 2.0 * np.pi * self.positions[:, None] * self.steering_matrix(nu)


def build_covariance(scene: SourceScene) -> np.ndarray:
    """Sigma(theta) = A Gamma A^H + sigma^2 I_N"""
    n = scene.n_sensors
    sigma = scene.sigma2 * np.eye(n, dtype=complex)
    if scene.n_sources:
        a = SteeringModel(n).steering_matrix(scene.nu)
        sigma = sigma + a @ scene.gamma @ a.conj().T
    return hermitian_part(sigma)


def true_shape(scene: SourceScene) -> ShapeMatrix:
    """V_{1,0} = Sigma(theta) / [Sigma(theta)]_{1,1}"""
    return ShapeMatrix.from_scatter(build_covariance(scene))


def _upper_indices(k: int) -> List[Tuple[int, int]]:
    # strictly upper triangle, column-major
    return [(i, j) for j in range(k) for i in range(j)]


def scene_to_zeta(gamma: np.ndarray) -> np.ndarray:
    """Real K^2 vector: diagonal, then Re and Im of the strict upper triangle (column-major)"""
    gamma = np.asarray(gamma, dtype=complex)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise DomainError(f"source correlation matrix must be square, got {gamma.shape}")
    upper = np.array([gamma[i, j] for i, j in _upper_indices(gamma.shape[0])], dtype=complex)
    return np.concatenate((gamma.diagonal().real, upper.real, upper.imag))


def zeta_to_gamma(zeta, k: int) -> np.ndarray:
    """Inverse of scene_to_zeta"""
    zeta = np.asarray(zeta, dtype=float)
    if zeta.ndim != 1 or zeta.size != k * k:
        raise DomainError(f"zeta must have length K^2 = {k * k}, got {zeta.size}")
    gamma = np.diag(zeta[:k]).astype(complex)
    m = (k * k - k) // 2
    for idx, (i, j) in enumerate(_upper_indices(k)):
        value = zeta[k + idx] + 1j * zeta[k + m + idx]
        gamma[i, j] = value
        gamma[j, i] = np.conj(value)
    return gamma
