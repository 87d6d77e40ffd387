#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Semiparametric stochastic CRB on the spatial frequencies

SSCRB(nu) = N(N+1) sigma0^2 / (2 L E{Q^2 psi0(Q)^2}) * C^{-1} with
C = Re[(D^H P_A^perp D) (Hadamard) (Gamma A^H Sigma^{-1} A Gamma)^T].
For Gaussian data the prefactor collapses to sigma0^2 / (2L), which is the
classical stochastic CRB.
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from .array_model import SteeringModel, build_covariance
from .ces import score_moment
from .exceptions import DomainError, SingularMatrixError
from .models import BoundResult, DensityGeneratorSpec, Family, SourceScene

logger = logging.getLogger(__name__)

CONDITION_WARNING = 1e10
RANK_RTOL = 1e-12


def projector_perp(a: np.ndarray) -> np.ndarray:
    """I - A (A^H A)^{-1} A^H for a full column rank A"""
    n, k = a.shape
    if np.linalg.matrix_rank(a, tol=RANK_RTOL * max(np.linalg.norm(a, 2), 1.0)) < k:
        raise SingularMatrixError(f"steering matrix ({n}x{k}) is rank deficient")
    gram = a.conj().T @ a
    return np.eye(n) - a @ np.linalg.solve(gram, a.conj().T)


def c_matrix(scene: SourceScene) -> np.ndarray:
    """Real symmetric K x K matrix C(nu, zeta)"""
    if scene.n_sources < 1:
        raise DomainError("the bound needs at least one source")
    model = SteeringModel(scene.n_sensors)
    a = model.steering_matrix(scene.nu)
    d = model.derivative_matrix(scene.nu)
    sigma = build_covariance(scene)
    gamma = scene.gamma

    perp = projector_perp(a)
    signal = gamma @ a.conj().T @ np.linalg.solve(sigma, a) @ gamma
    # real part of the whole Hadamard product keeps C symmetric PD; equals Re(.) (.) for K = 1
    c = np.real((d.conj().T @ perp @ d) * signal.T)
    return 0.5 * (c + c.T)


def sscrb(scene: SourceScene, spec: DensityGeneratorSpec, n_snapshots: int) -> BoundResult:
    """Full bound for L snapshots of CES data with the given density generator"""
    if n_snapshots < 1:
        raise DomainError(f"number of snapshots must be >= 1, got {n_snapshots}")
    n = scene.n_sensors
    c = c_matrix(scene)

    condition = float(np.linalg.cond(c))
    if not np.isfinite(condition):
        raise SingularMatrixError(f"C matrix is singular for nu={scene.nu}")
    if condition > CONDITION_WARNING:
        logger.warning(f"C matrix is ill-conditioned (cond={condition:.3e}); sources may be near-coherent")
    try:
        factor = linalg.cho_factor(c, lower=True)
    except linalg.LinAlgError as e:
        raise SingularMatrixError(f"C matrix is not positive definite: {e}") from e
    c_inv = linalg.cho_solve(factor, np.eye(c.shape[0]))
    c_inv = 0.5 * (c_inv + c_inv.T)

    scalar_factor = n * (n + 1) * scene.sigma2 / (2.0 * n_snapshots * score_moment(spec, n))
    matrix = scalar_factor * c_inv
    return BoundResult(
        matrix=matrix,
        index=float(np.linalg.norm(matrix, "fro")),
        scalar_factor=float(scalar_factor),
        trace=float(np.trace(matrix)),
        condition_number=condition,
        sweep_value=spec.sweep_value,
    )


def sscrb_sweep(scene: SourceScene, family: Family, values: Sequence[Optional[float]],
                n_snapshots: int) -> List[BoundResult]:
    """Bound at every sweep value; raises on the first singular point"""
    return [sscrb(scene, DensityGeneratorSpec.for_sweep(family, v), n_snapshots) for v in values]
