#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the MUSIC pseudospectrum and peak search
"""

import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from semidoa.array_model import SteeringModel, true_shape  # noqa: E402
from semidoa.exceptions import DomainError  # noqa: E402
from semidoa.models import ShapeMatrix, SourceScene  # noqa: E402
from semidoa.music import (VALUE_CAP, _circular_peaks, _rank_candidates,  # noqa: E402
                           estimate_doa, frequency_grid, noise_subspace, pseudospectrum,
                           spectrum_table)

SCENE = SourceScene.reference_scene()
V_TRUE = true_shape(SCENE)


def _random_shape(rng, n=8):
    x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return ShapeMatrix.from_scatter(x @ x.conj().T + 0.1 * np.eye(n))


def test_frequency_grid():
    grid = frequency_grid(8)
    assert_array_equal(grid, [-0.5, -0.375, -0.25, -0.125, 0.0, 0.125, 0.25, 0.375])


def test_noise_subspace_annihilates_steering_vectors():
    noise = noise_subspace(V_TRUE, 2)
    assert noise.shape == (8, 6)
    assert_allclose(noise.conj().T @ noise, np.eye(6), atol=1e-12)
    a = SteeringModel(8).steering_matrix(SCENE.nu)
    assert np.linalg.norm(noise.conj().T @ a) < 1e-8


def test_noise_projector_is_basis_independent():
    noise = noise_subspace(V_TRUE, 2)
    a = SteeringModel(8).steering_matrix(SCENE.nu)
    expected = np.eye(8) - a @ np.linalg.solve(a.conj().T @ a, a.conj().T)
    assert_allclose(noise @ noise.conj().T, expected, atol=1e-10)


def test_isotropic_noise_projector_is_idempotent():
    noise = noise_subspace(np.eye(5), 2)
    projector = noise @ noise.conj().T
    assert_allclose(projector @ projector, projector, atol=1e-12)


def test_pseudospectrum_peaks_at_sources():
    spectrum = pseudospectrum(V_TRUE, 2, 4096)
    grid, values = spectrum_table(spectrum)
    assert grid.size == values.size == 4096
    assert np.all(np.isfinite(values)) and np.all(values > 0)
    peaks = _circular_peaks(values)
    top = np.sort(grid[_rank_candidates(peaks, values, grid)[:2]])
    assert_allclose(top, [0.1, 0.2], atol=1.0 / 4096)


def test_pseudospectrum_is_scale_invariant():
    reference = pseudospectrum(V_TRUE, 2, 1024)
    for a in (0.1, 7.3):
        scaled = pseudospectrum(V_TRUE.matrix * a, 2, 1024)
        assert np.argmax(scaled.values) == np.argmax(reference.values)


def test_pseudospectrum_of_identity_is_flat():
    values = pseudospectrum(np.eye(8), 1, 512).values
    assert values.max() / values.min() < 1 + 1e-8


def test_pseudospectrum_is_capped():
    scene = SourceScene.from_snr(8, [0.125], snr_db=10.0)
    values = pseudospectrum(true_shape(scene), 1, 1024).values
    assert values.max() == VALUE_CAP
    assert np.all(np.isfinite(values))


def test_exact_covariance_estimates():
    coarse = estimate_doa(V_TRUE, 2, 4096, refine="none")
    assert_allclose(coarse.frequencies, [0.1, 0.2], atol=1.0 / 4096)
    for mode in ("parabolic", "bounded"):
        refined = estimate_doa(V_TRUE, 2, 4096, refine=mode)
        assert_allclose(refined.frequencies, [0.1, 0.2], atol=1e-5)
        assert refined.refinement == mode
        assert not refined.fallback
        assert refined.peaks_found >= 2


def test_single_source_estimate():
    scene = SourceScene.from_snr(8, [0.37], snr_db=5.0)
    estimate = estimate_doa(true_shape(scene), 1, 4096)
    assert estimate.frequencies[0] == pytest.approx(0.37, abs=1e-5)


def test_refinement_stays_within_one_cell():
    rng = np.random.default_rng(41)
    for _ in range(20):
        shape = _random_shape(rng)
        coarse = estimate_doa(shape, 2, 256, refine="none")
        for mode in ("parabolic", "bounded"):
            refined = estimate_doa(shape, 2, 256, refine=mode)
            if refined.fallback:
                continue
            shift = np.abs(np.sort(refined.frequencies) - np.sort(coarse.frequencies))
            assert np.all(np.minimum(shift, 1 - shift) <= 1.0 / 256 + 1e-12)


def test_estimate_is_function_of_shape_only():
    first = estimate_doa(V_TRUE, 2)
    second = estimate_doa(ShapeMatrix(V_TRUE.matrix.copy()), 2)
    assert_array_equal(first.frequencies, second.frequencies)
    assert_array_equal(first.peak_values, second.peak_values)


def _homogeneity_shapes():
    rng = np.random.default_rng(42)
    return [V_TRUE.matrix] + [_random_shape(rng).matrix for _ in range(20)]


def test_positive_homogeneity_is_bitwise_for_grid_maxima():
    for v in _homogeneity_shapes():
        reference = estimate_doa(v, 2, 1024, refine="none")
        for a in (1e-3, 1.0, 1e3):
            scaled = estimate_doa(a * v, 2, 1024, refine="none")
            assert_array_equal(scaled.frequencies, reference.frequencies)


@pytest.mark.parametrize("mode, atol", [("parabolic", 1e-12), ("bounded", 1e-7)])
def test_refined_estimates_scale_invariant_to_rounding(mode, atol):
    # eigenvectors of aV are not bit-identical to those of V; the bounded search
    # only resolves a flat minimum to about sqrt(eps) of the objective
    for v in _homogeneity_shapes():
        reference = estimate_doa(v, 2, 1024, refine=mode)
        for a in (1e-3, 1e3):
            refined = estimate_doa(a * v, 2, 1024, refine=mode)
            assert_allclose(refined.frequencies, reference.frequencies, rtol=0, atol=atol)


def test_isotropic_shape_falls_back():
    estimate = estimate_doa(np.eye(8), 2, 256)
    assert estimate.fallback
    assert estimate.frequencies.size == 2
    assert np.all(np.diff(estimate.frequencies) > 0)
    cells = np.round((estimate.frequencies + 0.5) * 256).astype(int)
    assert min(abs(cells[1] - cells[0]), 256 - abs(cells[1] - cells[0])) >= 2


def test_circular_peak_detection():
    assert_array_equal(_circular_peaks(np.array([5.0, 1.0, 2.0, 1.0, 4.0])), [0, 2])
    # plateaus count once, at the lower index
    assert_array_equal(_circular_peaks(np.array([1.0, 3.0, 3.0, 1.0])), [1])


def test_ties_prefer_lower_frequency():
    grid = frequency_grid(8)
    values = np.array([0, 2, 0, 2, 0, 1, 0, 2], dtype=float)
    order = _rank_candidates(np.array([1, 3, 5, 7]), values, grid)
    assert_array_equal(order, [1, 3, 7, 5])


def test_estimates_are_sorted_and_wrapped():
    scene = SourceScene.from_snr(8, [-0.49, 0.45], snr_db=10.0)
    estimate = estimate_doa(true_shape(scene), 2)
    assert np.all(np.diff(estimate.frequencies) > 0)
    assert np.all((estimate.frequencies >= -0.5) & (estimate.frequencies < 0.5))
    assert_allclose(estimate.frequencies, [-0.49, 0.45], atol=1e-5)


def test_invalid_arguments():
    with pytest.raises(DomainError):
        estimate_doa(V_TRUE, 2, refine="cubic")
    with pytest.raises(DomainError):
        estimate_doa(V_TRUE, 0)
    with pytest.raises(DomainError):
        estimate_doa(V_TRUE, 8)
    with pytest.raises(DomainError):
        estimate_doa(V_TRUE, 2, grid_size=32)
    with pytest.raises(DomainError):
        pseudospectrum(V_TRUE, 2, grid_size=16)
