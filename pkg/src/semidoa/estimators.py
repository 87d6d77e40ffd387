#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Shape matrix estimators

SCM, Tyler's fixed-point M-estimator and the one-step rank-based
R-estimator built on Tyler's estimate. Every estimator returns a
ShapeMatrix with top-left entry 1 and an EstimatorDiagnostics record.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.stats import gamma as gamma_dist

from .exceptions import (
    DegenerateInputError,
    DomainError,
    NonConvergenceError,
    PositiveDefinitenessError,
    SemidoaError,
    SingularMatrixError,
)
from .hermitian import (
    apply_perp_projector,
    hermitian_eig,
    hermitian_part,
    hermitian_sqrt_inv,
    is_positive_definite,
    kron,
    perp_projector,
    selection_matrix,
    unvecd,
    vec,
)
from .models import EstimatorDiagnostics, RankStatistics, ShapeMatrix, SnapshotSet

logger = logging.getLogger(__name__)

TYLER_TOL = 1e-9
TYLER_MAX_ITER = 500

# eigenvalue floor (times the largest eigenvalue) used to repair a non-PD R-estimate
PD_REPAIR_FLOOR = 1e-8

# step halvings tried when the alpha probe leaves the PD cone
MAX_PROBE_HALVINGS = 30


def _data(snapshots) -> np.ndarray:
    if isinstance(snapshots, SnapshotSet):
        return snapshots.data
    return np.atleast_2d(np.asarray(snapshots, dtype=complex))


def _require_enough_snapshots(z: np.ndarray):
    n_snapshots, n = z.shape
    if n_snapshots < n:
        raise DegenerateInputError(f"need at least N={n} snapshots, got L={n_snapshots}")


def scm_shape(snapshots) -> ShapeMatrix:
    """Sample covariance matrix normalized by its top-left entry"""
    z = _data(snapshots)
    _require_enough_snapshots(z)
    scm = z.T @ z.conj() / z.shape[0]
    if not is_positive_definite(scm):
        raise DegenerateInputError("sample covariance matrix is rank deficient")
    return ShapeMatrix.from_scatter(scm, EstimatorDiagnostics("scm"))


def tyler_map(z: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """(N/L) sum_l z_l z_l^H / (z_l^H Sigma^{-1} z_l)"""
    n_snapshots, n = z.shape
    q = np.real(np.einsum("li,ij,lj->l", z.conj(), np.linalg.inv(sigma), z))
    return (n / n_snapshots) * (z / q[:, None]).T @ z.conj()


def tyler_residual(snapshots, sigma: np.ndarray) -> float:
    """Relative Frobenius residual of Tyler's fixed-point equation at sigma"""
    z = _data(snapshots)
    sigma = np.asarray(sigma, dtype=complex)
    return float(np.linalg.norm(tyler_map(z, sigma) - sigma) / np.linalg.norm(sigma))


def tyler_shape(snapshots, tol: float = TYLER_TOL, max_iter: int = TYLER_MAX_ITER) -> ShapeMatrix:
    """Tyler's M-estimator of shape

    Iterates are trace-normalized (trace N) starting from the identity; the
    top-left normalization is applied once at exit. The returned estimate
    satisfies the fixed-point residual < tol.
    """
    z = _data(snapshots)
    _require_enough_snapshots(z)
    norms = np.linalg.norm(z, axis=1)
    if np.any(norms == 0):
        raise DegenerateInputError(f"snapshot {int(np.argmin(norms))} is the zero vector")
    # the fixed-point map ignores per-snapshot scale, so work on unit vectors
    x = z / norms[:, None]
    n = z.shape[1]

    sigma = np.eye(n, dtype=complex)
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        try:
            mapped = hermitian_part(tyler_map(x, sigma))
        except np.linalg.LinAlgError as e:
            raise DegenerateInputError(f"Tyler iterate became singular: {e}") from e
        residual = np.linalg.norm(mapped - sigma) / np.linalg.norm(sigma)
        if residual < tol:
            logger.debug(f"Tyler converged in {iteration} iterations (residual {residual:.2e})")
            diagnostics = EstimatorDiagnostics("tyler", iterations=iteration, residual=float(residual))
            return ShapeMatrix.from_scatter(sigma, diagnostics)
        sigma = n * mapped / np.trace(mapped).real

    raise NonConvergenceError(
        f"Tyler iteration did not converge in {max_iter} iterations (residual {residual:.2e})"
    )


def compute_rank_statistics(snapshots, shape: ShapeMatrix) -> RankStatistics:
    """q*_l = z_l^H V^{-1} z_l, their ranks (ties broken by index) and u*_l = V^{-1/2} z_l / sqrt(q*_l)"""
    z = _data(snapshots)
    _, inv_sqrt = hermitian_sqrt_inv(shape.matrix)
    w = z @ inv_sqrt.T
    q_star = np.real(np.einsum("li,li->l", w.conj(), w))
    if np.any(q_star <= 0):
        raise DegenerateInputError(f"snapshot {int(np.argmin(q_star))} is the zero vector")
    order = np.argsort(q_star, kind="stable")
    ranks = np.empty(q_star.size, dtype=int)
    ranks[order] = np.arange(1, q_star.size + 1)
    u_star = w / np.sqrt(q_star)[:, None]
    return RankStatistics(q_star=q_star, ranks=ranks, u_star=u_star)


def vdw_score(u, n: int):
    """K_vdW(u) = -G_N^{-1}(u), G_N the Gamma(N, 1) cdf"""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("van der Waerden score argument must lie in (0, 1)")
    return -gamma_dist.ppf(u, n)


class LOperator:
    """L_V = P (V^{-T/2} kron V^{-1/2}) Pi_perp, applied without forming N^2 x N^2 matrices"""

    def __init__(self, shape: ShapeMatrix):
        self.n = shape.dim
        _, self.inv_sqrt = hermitian_sqrt_inv(shape.matrix)
        self.inv = self.inv_sqrt @ self.inv_sqrt

    def apply(self, x: np.ndarray) -> np.ndarray:
        """L_V x for an N^2 vector x (column-major vec of an N x N matrix)"""
        x = apply_perp_projector(np.asarray(x, dtype=complex), self.n)
        m = x.reshape((self.n, self.n), order="F")
        # (V^{-T/2} kron V^{-1/2}) vec(X) = vec(V^{-1/2} X V^{-1/2}) since V^{-1/2} is Hermitian
        return vec(self.inv_sqrt @ m @ self.inv_sqrt)[1:]

    def gram(self) -> np.ndarray:
        """L_V L_V^H = P [V^{-T} kron V^{-1} - N^{-1} vec(V^{-1}) vec(V^{-1})^H] P^T"""
        v_inv = vec(self.inv)
        full = kron(self.inv.T, self.inv) - np.outer(v_inv, v_inv.conj()) / self.n
        return hermitian_part(full[1:, 1:])

    def dense(self) -> np.ndarray:
        """Explicit (N^2 - 1) x N^2 matrix; for tests"""
        return (selection_matrix(self.n)
                @ kron(self.inv_sqrt.conj(), self.inv_sqrt)
                @ perp_projector(self.n))


def build_l_operator(shape: ShapeMatrix) -> LOperator:
    return LOperator(shape)


def rank_central_sequence(snapshots, shape: ShapeMatrix) -> np.ndarray:
    """T(V) = L^{-1/2} L_V sum_l K_vdW(r_l / (L+1)) vec(u_l u_l^H)"""
    z = _data(snapshots)
    n_snapshots, n = z.shape
    stats = compute_rank_statistics(z, shape)
    scores = vdw_score(stats.ranks / (n_snapshots + 1.0), n)
    u = stats.u_star
    weighted = (u * scores[:, None]).T @ u.conj()
    return LOperator(shape).apply(vec(weighted)) / np.sqrt(n_snapshots)


@dataclass
class _NewtonDirection:
    central: np.ndarray
    direction: np.ndarray
    alpha: float
    probe_step: float


def _newton_direction(z: np.ndarray, shape: ShapeMatrix) -> _NewtonDirection:
    n_snapshots, n = z.shape
    central = rank_central_sequence(z, shape)
    norm_central = np.linalg.norm(central)
    if norm_central == 0:
        raise DegenerateInputError("rank central sequence vanished; no perturbation direction")
    try:
        factor = linalg.cho_factor(LOperator(shape).gram())
        direction = linalg.cho_solve(factor, central)
    except linalg.LinAlgError as e:
        raise SingularMatrixError(f"Gram matrix of L_V is not positive definite: {e}") from e

    h = unvecd(direction, 0.0)
    h = hermitian_part(h)
    h[0, 0] = 0.0

    step = 1.0
    for _ in range(MAX_PROBE_HALVINGS):
        probe = shape.matrix + step * h / np.sqrt(n_snapshots)
        if is_positive_definite(probe):
            break
        step *= 0.5
    else:
        raise DegenerateInputError("could not find a positive-definite probe for alpha")

    probe_shape = ShapeMatrix(probe)
    shifted = rank_central_sequence(z, probe_shape)
    # secant slope along the Newton direction, in the metric of L_V L_V^H
    alpha = float(np.linalg.norm(shifted - central) / (step * norm_central))
    if not alpha > 0:
        raise DegenerateInputError("rank central sequence did not move along the probe direction")
    return _NewtonDirection(central=central, direction=direction, alpha=alpha, probe_step=step)


def estimate_alpha(snapshots, shape: ShapeMatrix) -> float:
    """Data-driven cross-information coefficient alpha for the one-step R-estimator"""
    z = _data(snapshots)
    _require_enough_snapshots(z)
    return _newton_direction(z, shape).alpha


def repair_positive_definite(matrix: np.ndarray) -> np.ndarray:
    """Clip eigenvalues at PD_REPAIR_FLOOR times the largest one and re-symmetrize"""
    eigenvalues, eigenvectors = hermitian_eig(hermitian_part(matrix))
    floor = PD_REPAIR_FLOOR * eigenvalues[-1]
    if eigenvalues[-1] <= 0:
        raise PositiveDefinitenessError("matrix has no positive eigenvalue to repair from")
    clipped = np.maximum(eigenvalues, floor)
    return hermitian_part((eigenvectors * clipped) @ eigenvectors.conj().T)


def r_estimator_shape(snapshots, tyler: ShapeMatrix, alpha: Optional[float] = None) -> ShapeMatrix:
    """One-step R-estimator of shape from a preliminary Tyler estimate

    vecd(V_R) = vecd(V_Ty) - 1/(L alpha) [L L^H]^{-1} L sum_l K_vdW(r_l/(L+1)) vec(u_l u_l^H)
    """
    z = _data(snapshots)
    _require_enough_snapshots(z)
    n_snapshots = z.shape[0]

    newton = _newton_direction(z, tyler)
    if alpha is None:
        alpha = newton.alpha
    logger.debug(f"R-estimator alpha = {alpha:.6g} (probe step {newton.probe_step:g})")

    vecd_r = vec(tyler.matrix)[1:] - newton.direction / (np.sqrt(n_snapshots) * alpha)
    v = hermitian_part(unvecd(vecd_r, 1.0))
    np.fill_diagonal(v, v.diagonal().real)
    v[0, 0] = 1.0

    iterations = tyler.diagnostics.iterations if tyler.diagnostics is not None else 0
    diagnostics = EstimatorDiagnostics("r", iterations=iterations, alpha=float(alpha))
    if not is_positive_definite(v):
        logger.warning("R-estimate left the positive-definite cone; clipping eigenvalues")
        v = repair_positive_definite(v)
        diagnostics.pd_repaired = True
    return ShapeMatrix.from_scatter(v, diagnostics)


def estimate_shape(name: str, snapshots, tol: float = TYLER_TOL,
                   max_iter: int = TYLER_MAX_ITER) -> ShapeMatrix:
    """Run one of the estimators {scm, tyler, r} on a snapshot set"""
    if name == "scm":
        return scm_shape(snapshots)
    if name == "tyler":
        return tyler_shape(snapshots, tol, max_iter)
    if name == "r":
        return r_estimator_shape(snapshots, tyler_shape(snapshots, tol, max_iter))
    raise DomainError(f"unknown estimator {name!r}; expected one of scm, tyler, r")


def estimate_all(snapshots, names: Tuple[str, ...], tol: float = TYLER_TOL,
                 max_iter: int = TYLER_MAX_ITER) -> dict:
    """Estimates for several estimators on the same data, sharing one Tyler run

    Values are ShapeMatrix objects, or the exception raised by that estimator.
    """
    results = {}
    tyler = None
    tyler_error = None
    if "tyler" in names or "r" in names:
        try:
            tyler = tyler_shape(snapshots, tol, max_iter)
        except SemidoaError as e:
            tyler_error = e
    for name in names:
        try:
            if name == "scm":
                results[name] = scm_shape(snapshots)
            elif tyler is None:
                results[name] = tyler_error
            elif name == "tyler":
                results[name] = tyler
            else:
                results[name] = r_estimator_shape(snapshots, tyler)
        except SemidoaError as e:
            results[name] = e
    return results
