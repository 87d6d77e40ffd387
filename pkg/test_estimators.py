#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the SCM, Tyler and rank-based R shape estimators
"""

import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from semidoa.array_model import build_covariance, true_shape  # noqa: E402
from semidoa.ces import synthesize_snapshots  # noqa: E402
from semidoa.estimators import (build_l_operator, compute_rank_statistics, estimate_all,  # noqa: E402
                                estimate_alpha, estimate_shape, r_estimator_shape,
                                repair_positive_definite, scm_shape, tyler_residual, tyler_shape,
                                vdw_score)
from semidoa.exceptions import (DegenerateInputError, DomainError,  # noqa: E402
                                NonConvergenceError)
from semidoa.hermitian import is_positive_definite, vec  # noqa: E402
from semidoa.models import DensityGeneratorSpec, ShapeMatrix, SourceScene  # noqa: E402

GAUSSIAN = DensityGeneratorSpec.gaussian()
SCENE = SourceScene.reference_scene()
SIGMA = build_covariance(SCENE)
V_TRUE = true_shape(SCENE).matrix


def _snapshots(spec=GAUSSIAN, n_snapshots=40, seed=1, key=(), sigma=SIGMA):
    return synthesize_snapshots(sigma, spec, n_snapshots, seed, stream_key=key)


def _small_sigma():
    return build_covariance(SourceScene.from_snr(4, [0.1, 0.3], snr_db=5.0, rho=0.5))


def test_scm_hand_example():
    z = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=complex)
    shape = scm_shape(z)
    assert_allclose(shape.matrix, np.eye(2), atol=0)


def test_scm_needs_full_rank():
    with pytest.raises(DegenerateInputError):
        scm_shape(np.ones((3, 4)))
    with pytest.raises(DegenerateInputError):
        scm_shape(np.ones((10, 4)))


@pytest.mark.parametrize("name", ["scm", "tyler", "r"])
def test_estimators_normalize_top_left(name):
    shape = estimate_shape(name, _snapshots())
    assert shape.matrix[0, 0] == 1
    assert_allclose(shape.matrix, shape.matrix.conj().T, atol=0)
    assert np.all(shape.matrix.diagonal().imag == 0)
    assert is_positive_definite(shape.matrix)
    assert shape.diagnostics.estimator == name


@pytest.mark.parametrize("name", ["scm", "tyler", "r"])
def test_estimators_invariant_to_common_scale(name):
    snapshots = _snapshots(seed=2)
    reference = estimate_shape(name, snapshots, tol=1e-12)
    scaled = estimate_shape(name, snapshots.scaled(3.7), tol=1e-12)
    assert_allclose(scaled.matrix, reference.matrix, rtol=0, atol=1e-10)


def test_tyler_invariant_to_per_snapshot_scale():
    rng = np.random.default_rng(3)
    for trial in range(50):
        snapshots = _snapshots(DensityGeneratorSpec.student_t(3), seed=3, key=(trial,))
        factors = rng.uniform(0.01, 100.0, snapshots.n_snapshots)
        reference = tyler_shape(snapshots, tol=1e-12)
        scaled = tyler_shape(snapshots.scaled(factors), tol=1e-12)
        assert_allclose(scaled.matrix, reference.matrix, rtol=0, atol=1e-10)


def test_tyler_satisfies_fixed_point():
    for trial in range(50):
        snapshots = _snapshots(DensityGeneratorSpec.generalized_gaussian(0.5), seed=4, key=(trial,))
        shape = tyler_shape(snapshots)
        assert tyler_residual(snapshots, shape.matrix) < 1.0001e-9
        assert shape.diagnostics.iterations >= 1


def test_tyler_single_sensor():
    z = np.array([[1.0], [2.0j], [-0.5]])
    assert_array_equal(tyler_shape(z).matrix, [[1.0]])


def test_tyler_failures():
    z = _snapshots().data.copy()
    with pytest.raises(NonConvergenceError):
        tyler_shape(z, max_iter=1)
    z[5] = 0
    with pytest.raises(DegenerateInputError):
        tyler_shape(z)


def test_tyler_more_robust_than_scm_on_heavy_tails():
    wins = 0
    for trial in range(20):
        snapshots = _snapshots(DensityGeneratorSpec.student_t(2), n_snapshots=2000, seed=5, key=(trial,))
        tyler_error = np.linalg.norm(tyler_shape(snapshots).matrix - V_TRUE)
        scm_error = np.linalg.norm(scm_shape(snapshots).matrix - V_TRUE)
        wins += tyler_error < scm_error
    assert wins >= 18


def test_rank_statistics_examples():
    z = np.sqrt(np.array([[3.0, 0.0], [1.0, 0.0], [2.0, 0.0]])).astype(complex)
    stats_ = compute_rank_statistics(z, ShapeMatrix(np.eye(2)))
    assert_allclose(stats_.q_star, [3.0, 1.0, 2.0])
    assert_array_equal(stats_.ranks, [3, 1, 2])

    ties = compute_rank_statistics(np.array([[1.0, 0.0], [0.0, 1.0]]), ShapeMatrix(np.eye(2)))
    assert_array_equal(ties.ranks, [1, 2])


def test_rank_statistics_properties():
    snapshots = _snapshots(n_snapshots=200, seed=6)
    result = compute_rank_statistics(snapshots, tyler_shape(snapshots))
    assert_array_equal(np.sort(result.ranks), np.arange(1, 201))
    assert_array_equal(result.ranks[np.argsort(result.q_star)], np.arange(1, 201))
    assert_allclose(np.linalg.norm(result.u_star, axis=1), 1.0, atol=1e-12)


def test_rank_statistics_rejects_zero_snapshot():
    z = _snapshots().data.copy()
    z[0] = 0
    with pytest.raises(DegenerateInputError):
        compute_rank_statistics(z, ShapeMatrix(V_TRUE))


def test_normalized_ranks_are_uniform_across_runs():
    sigma = _small_sigma()
    shape = ShapeMatrix.from_scatter(sigma)
    positions = []
    for run in range(500):
        z = _snapshots(n_snapshots=100, seed=7, key=(run,), sigma=sigma)
        positions.append(compute_rank_statistics(z, shape).ranks[0] / 101.0)
    assert stats.kstest(positions, stats.uniform(0, 1).cdf).pvalue > 1e-3


def test_vdw_score():
    assert vdw_score(0.5, 1) == pytest.approx(np.log(0.5), rel=1e-12)
    for u in (0.1, 0.5, 0.9):
        assert stats.gamma(8).cdf(-vdw_score(u, 8)) == pytest.approx(u, abs=1e-10)
    grid = np.linspace(0.005, 0.995, 100)
    assert np.all(np.diff(vdw_score(grid, 8)) < 0)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(DomainError):
            vdw_score(bad, 4)


def test_l_operator_annihilates_identity():
    operator = build_l_operator(ShapeMatrix(np.eye(3)))
    assert_allclose(operator.apply(vec(np.eye(3))), np.zeros(8), atol=1e-15)


def test_l_operator_dense_matches_implicit():
    shape = ShapeMatrix.from_scatter(_small_sigma())
    operator = build_l_operator(shape)
    dense = operator.dense()
    assert dense.shape == (15, 16)
    rng = np.random.default_rng(8)
    for _ in range(20):
        x = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        assert_allclose(operator.apply(x), dense @ x, rtol=0, atol=1e-12)
    assert_allclose(operator.gram(), dense @ dense.conj().T, rtol=1e-10, atol=1e-10)


def test_l_operator_gram_is_positive_definite():
    gram = build_l_operator(ShapeMatrix(V_TRUE)).gram()
    assert gram.shape == (63, 63)
    assert_allclose(gram, gram.conj().T, atol=0)
    assert np.linalg.eigvalsh(gram).min() > 0


def test_alpha_positive_and_scale_invariant():
    snapshots = _snapshots(n_snapshots=200, seed=9)
    tyler = tyler_shape(snapshots, tol=1e-12)
    alpha = estimate_alpha(snapshots, tyler)
    assert alpha > 0
    rescaled = estimate_alpha(snapshots.scaled(0.01), tyler_shape(snapshots.scaled(0.01), tol=1e-12))
    assert rescaled == pytest.approx(alpha, rel=1e-8)


def test_alpha_is_stable_across_datasets():
    values = []
    for seed in (10, 11):
        snapshots = _snapshots(n_snapshots=4000, seed=seed)
        values.append(estimate_alpha(snapshots, tyler_shape(snapshots)))
    assert abs(values[0] - values[1]) / max(values) < 0.2


def test_r_estimator_without_step_returns_tyler():
    snapshots = _snapshots(seed=12)
    tyler = tyler_shape(snapshots)
    result = r_estimator_shape(snapshots, tyler, alpha=np.inf)
    assert_array_equal(result.matrix, tyler.matrix)


def test_r_estimator_diagnostics():
    snapshots = _snapshots(seed=13)
    tyler = tyler_shape(snapshots)
    result = r_estimator_shape(snapshots, tyler)
    assert result.diagnostics.alpha > 0
    assert result.diagnostics.iterations == tyler.diagnostics.iterations
    assert not np.allclose(result.matrix, tyler.matrix)


def test_repair_positive_definite():
    matrix = np.diag([1.0, 0.5, -0.2]).astype(complex)
    repaired = repair_positive_definite(matrix)
    assert is_positive_definite(repaired)
    assert_allclose(np.linalg.eigvalsh(repaired), [1e-8, 0.5, 1.0], atol=1e-14)


def test_estimate_all_shares_failures():
    results = estimate_all(np.ones((3, 4)), ("scm", "tyler", "r"))
    assert all(isinstance(results[name], DegenerateInputError) for name in ("scm", "tyler", "r"))

    snapshots = _snapshots(seed=14)
    results = estimate_all(snapshots, ("tyler", "r"))
    assert_array_equal(results["tyler"].matrix, tyler_shape(snapshots).matrix)
    assert isinstance(results["r"], ShapeMatrix)


def test_estimate_shape_unknown_name():
    with pytest.raises(DomainError):
        estimate_shape("huber", _snapshots())


def _mean_errors(spec, trials, seed):
    sigma = _small_sigma()
    target = ShapeMatrix.from_scatter(sigma).matrix
    tyler_errors, r_errors = [], []
    for trial in range(trials):
        snapshots = _snapshots(spec, n_snapshots=200, seed=seed, key=(trial,), sigma=sigma)
        tyler = tyler_shape(snapshots)
        r = r_estimator_shape(snapshots, tyler)
        tyler_errors.append(np.linalg.norm(tyler.matrix - target) ** 2)
        r_errors.append(np.linalg.norm(r.matrix - target) ** 2)
    return np.mean(tyler_errors), np.mean(r_errors)


@pytest.mark.slow
def test_r_estimator_beats_tyler_on_gaussian_data():
    tyler_mse, r_mse = _mean_errors(GAUSSIAN, 500, seed=15)
    assert r_mse <= tyler_mse


@pytest.mark.slow
def test_r_estimator_close_to_tyler_on_t_data():
    tyler_mse, r_mse = _mean_errors(DensityGeneratorSpec.student_t(3), 500, seed=16)
    assert r_mse <= 1.05 * tyler_mse


@pytest.mark.slow
def test_tyler_beats_scm_on_heavy_tails_at_scale():
    wins = 0
    for trial in range(100):
        snapshots = _snapshots(DensityGeneratorSpec.student_t(2), n_snapshots=10_000, seed=17, key=(trial,))
        tyler_error = np.linalg.norm(tyler_shape(snapshots).matrix - V_TRUE)
        scm_error = np.linalg.norm(scm_shape(snapshots).matrix - V_TRUE)
        wins += tyler_error < scm_error
    assert wins >= 90


@pytest.mark.slow
def test_normalized_ranks_are_uniform_at_scale():
    sigma = _small_sigma()
    shape = ShapeMatrix.from_scatter(sigma)
    positions = []
    for run in range(2000):
        z = _snapshots(n_snapshots=1000, seed=18, key=(run,), sigma=sigma)
        positions.append(compute_rank_statistics(z, shape).ranks[0] / 1001.0)
    assert stats.kstest(positions, stats.uniform(0, 1).cdf).statistic < 0.05
