#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
MUSIC pseudospectrum and DOA functional

The noise subspace is spanned by the eigenvectors of the N-K smallest
eigenvalues of a shape matrix; sources show up as peaks of
P_M(nu) = 1 / ||E_n^H a(nu)||^2 on a uniform circular grid over [-0.5, 0.5).
"""

import logging
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy import optimize

from .array_model import SteeringModel
from .exceptions import DomainError
from .hermitian import hermitian_eig
from .models import DoaEstimate, Pseudospectrum, ShapeMatrix, wrap_frequency

logger = logging.getLogger(__name__)

DEFAULT_GRID_SIZE = 4096
MIN_GRID_SIZE = 64
VALUE_CAP = 1e12
REFINE_MODES = ("none", "parabolic", "bounded")

# eigenvalue spread (relative) below which a shape matrix counts as isotropic
ISOTROPIC_RTOL = 1e-12


def _matrix(shape) -> np.ndarray:
    if isinstance(shape, ShapeMatrix):
        return shape.matrix
    return np.asarray(shape, dtype=complex)


def _check_order(n: int, k: int):
    if not 1 <= k < n:
        raise DomainError(f"number of sources must satisfy 1 <= K < N={n}, got K={k}")


def frequency_grid(grid_size: int) -> np.ndarray:
    if grid_size < 2:
        raise DomainError(f"grid size must be >= 2, got {grid_size}")
    return -0.5 + np.arange(grid_size) / grid_size


@lru_cache(maxsize=8)
def _grid_steering(n: int, grid_size: int) -> np.ndarray:
    steering = SteeringModel(n).steering_matrix(frequency_grid(grid_size))
    steering.setflags(write=False)
    return steering


def noise_subspace(shape, k: int) -> np.ndarray:
    """N x (N-K) orthonormal basis of the eigenvectors of the N-K smallest eigenvalues"""
    v = _matrix(shape)
    _check_order(v.shape[0], k)
    _, eigenvectors = hermitian_eig(v)
    return eigenvectors[:, : v.shape[0] - k]


def _denominator(noise: np.ndarray, steering: np.ndarray) -> np.ndarray:
    projected = noise.conj().T @ steering
    return np.real(np.einsum("kg,kg->g", projected.conj(), projected))


def _capped_inverse(denominator: np.ndarray, value_cap: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        values = 1.0 / denominator
    return np.minimum(values, value_cap)


def pseudospectrum(shape, k: int, grid_size: int = DEFAULT_GRID_SIZE,
                   value_cap: float = VALUE_CAP) -> Pseudospectrum:
    """P_M(nu) = 1 / ||E_n^H a(nu)||^2 on the uniform grid, clamped at value_cap"""
    v = _matrix(shape)
    if grid_size < MIN_GRID_SIZE:
        raise DomainError(f"grid size must be >= {MIN_GRID_SIZE}, got {grid_size}")
    noise = noise_subspace(v, k)
    denominator = _denominator(noise, _grid_steering(v.shape[0], grid_size))
    return Pseudospectrum(grid=frequency_grid(grid_size), values=_capped_inverse(denominator, value_cap))


def _circular_peaks(values: np.ndarray) -> np.ndarray:
    left = np.roll(values, 1)
    right = np.roll(values, -1)
    return np.flatnonzero((values > left) & (values >= right))


def _rank_candidates(indices: np.ndarray, values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # highest value first, ties by lower frequency
    order = np.lexsort((grid[indices], -values[indices]))
    return indices[order]


def _separated_maxima(values: np.ndarray, grid: np.ndarray, k: int, min_separation: int = 2) -> List[int]:
    grid_size = values.size
    chosen: List[int] = []
    for index in _rank_candidates(np.arange(grid_size), values, grid):
        distance = [min(abs(index - c), grid_size - abs(index - c)) for c in chosen]
        if all(d >= min_separation for d in distance):
            chosen.append(int(index))
            if len(chosen) == k:
                break
    return chosen


def _refine_parabolic(denominator: np.ndarray, index: int) -> float:
    """Vertex offset (in grid cells) of the parabola through three denominator samples"""
    grid_size = denominator.size
    d_minus = denominator[(index - 1) % grid_size]
    d_zero = denominator[index]
    d_plus = denominator[(index + 1) % grid_size]
    curvature = d_minus - 2.0 * d_zero + d_plus
    if curvature <= 0:
        return 0.0
    return float(np.clip(0.5 * (d_minus - d_plus) / curvature, -0.5, 0.5))


def _refine_bounded(noise: np.ndarray, model: SteeringModel, nu: float, cell: float) -> float:
    def objective(x):
        a = model.steering_vector(x)
        return float(np.real(np.vdot(noise.conj().T @ a, noise.conj().T @ a)))

    result = optimize.minimize_scalar(objective, bounds=(nu - cell, nu + cell), method="bounded",
                                      options={"xatol": 1e-12})
    return float(result.x) if result.success else nu


def estimate_doa(shape, k: int, grid_size: int = DEFAULT_GRID_SIZE,
                 refine: str = "parabolic", value_cap: float = VALUE_CAP) -> DoaEstimate:
    """Positions of the K largest local maxima of the MUSIC pseudospectrum

    Peaks are searched on the circular grid; refinement never moves an
    estimate by more than one grid cell. If fewer than K local maxima exist
    (or the shape matrix is isotropic) the K largest grid values at least two
    cells apart are used and the estimate is flagged as a fallback.
    """
    if refine not in REFINE_MODES:
        raise DomainError(f"refine must be one of {REFINE_MODES}, got {refine!r}")
    v = _matrix(shape)
    n = v.shape[0]
    _check_order(n, k)
    if grid_size < MIN_GRID_SIZE:
        raise DomainError(f"grid size must be >= {MIN_GRID_SIZE}, got {grid_size}")

    eigenvalues, eigenvectors = hermitian_eig(v)
    noise = eigenvectors[:, : n - k]
    grid = frequency_grid(grid_size)
    denominator = _denominator(noise, _grid_steering(n, grid_size))
    values = _capped_inverse(denominator, value_cap)

    isotropic = (eigenvalues[-1] - eigenvalues[0]) <= ISOTROPIC_RTOL * abs(eigenvalues[-1])
    peaks = np.array([], dtype=int) if isotropic else _circular_peaks(values)
    fallback = isotropic or peaks.size < k
    if fallback:
        logger.warning(f"MUSIC found {peaks.size} local maxima for K={k}; using separated grid maxima")
        chosen = _separated_maxima(values, grid, k)
    else:
        chosen = [int(i) for i in _rank_candidates(peaks, values, grid)[:k]]

    model = SteeringModel(n)
    cell = 1.0 / grid_size
    frequencies = []
    for index in chosen:
        nu = grid[index]
        if refine == "parabolic":
            nu = nu + _refine_parabolic(denominator, index) * cell
        elif refine == "bounded":
            nu = _refine_bounded(noise, model, nu, cell)
        frequencies.append(nu)

    frequencies = wrap_frequency(np.array(frequencies))
    if refine == "none":
        peak_values = values[chosen]
    else:
        peak_values = _capped_inverse(_denominator(noise, model.steering_matrix(frequencies)), value_cap)
    order = np.argsort(frequencies, kind="stable")
    return DoaEstimate(
        frequencies=frequencies[order],
        peak_values=np.asarray(peak_values)[order],
        peaks_found=int(peaks.size),
        fallback=bool(fallback),
        refinement=refine,
    )


def spectrum_table(spectrum: Pseudospectrum) -> Tuple[np.ndarray, np.ndarray]:
    return spectrum.grid, spectrum.values
