#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Tests for the Monte Carlo harness: pairing, MSE index, accounting and determinism
"""

import os
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), 'src'))

from semidoa.bound import sscrb  # noqa: E402
from semidoa.config import load_experiment_config  # noqa: E402
from semidoa.models import ExperimentConfig, Family, SourceScene  # noqa: E402
from semidoa.simulation import (EstimatorOutcome, MonteCarloRunner, TrialOutcome,  # noqa: E402
                                circular_distance, mse_index, outer_product_norm,
                                pair_frequencies, run_experiment, run_trial, summarize)
from semidoa.storage import result_frame  # noqa: E402

CONFIG_DIR = os.path.join(os.path.dirname(__file__), 'config')


def _config(**overrides):
    values = dict(
        scene=SourceScene.reference_scene(),
        family=Family.STUDENT_T,
        sweep=[3.0, 10.0],
        snapshots=40,
        runs=6,
        master_seed=7,
        grid_size=256,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def test_circular_distance():
    assert_allclose(circular_distance([0.49, 0.1], [-0.49, 0.3]), [0.02, 0.2], atol=1e-12)


def test_pair_frequencies_examples():
    assert_allclose(pair_frequencies([0.2, 0.1], [0.1, 0.2]), [0.1, 0.2])
    assert_allclose(pair_frequencies([0.49, -0.49], [-0.48, 0.48]), [-0.49, 0.49])
    assert_allclose(pair_frequencies([0.1, 0.2], [0.1, 0.2]), [0.1, 0.2])


def test_pair_frequencies_rejects_mismatch():
    with pytest.raises(ValueError):
        pair_frequencies([0.1], [0.1, 0.2])


def test_mse_index_examples():
    truth = np.array([0.1, 0.2])
    assert mse_index([truth, truth], truth) == 0.0
    assert mse_index([[0.11, 0.22]], truth) == pytest.approx(0.0005, rel=1e-10)
    e = np.array([0.003, -0.004])
    assert mse_index([truth + e, truth - e], truth) == pytest.approx(e @ e, rel=1e-10)


def test_mse_index_uses_wrapped_errors():
    assert mse_index([[0.49]], [-0.49]) == pytest.approx(0.02 ** 2, rel=1e-8)


def test_outer_product_norm_is_squared_norm():
    e = np.array([0.3, -0.1, 0.2])
    assert outer_product_norm(e) == pytest.approx(e @ e, rel=1e-12)


def _outcome(trial, error=None, failure=None, **kwargs):
    record = EstimatorOutcome(error=None if error is None else np.asarray(error), failure=failure, **kwargs)
    return TrialOutcome(0, trial, {"tyler": record})


def test_summarize_accounting():
    outcomes = [
        _outcome(0, [0.01, 0.0], iterations=10),
        _outcome(1, [0.3, 0.0], iterations=12),
        _outcome(2, failure="NonConvergenceError: no"),
        _outcome(3, [0.0, -0.02], iterations=14, fallback=True),
    ]
    included = summarize("tyler", outcomes)
    assert (included.successes, included.outliers, included.failures, included.runs) == (2, 1, 1, 4)
    assert included.mse_index == pytest.approx((1e-4 + 0.09 + 4e-4) / 3)
    assert included.mean_iterations == pytest.approx(12.0)
    assert included.fallbacks == 1

    excluded = summarize("tyler", outcomes, exclude_outliers=True)
    assert (excluded.successes, excluded.outliers, excluded.failures) == (2, 1, 1)
    assert excluded.mse_index == pytest.approx((1e-4 + 4e-4) / 2)


def test_summarize_all_failed():
    summary = summarize("tyler", [_outcome(0, failure="x"), _outcome(1, failure="y")])
    assert summary.failures == 2
    assert np.isnan(summary.mse_index)


def test_run_trial_is_deterministic():
    config = _config()
    first = run_trial(config, 1, 4)
    second = run_trial(config, 1, 4)
    other = run_trial(config, 1, 5)
    for name in config.estimators:
        assert_array_equal(first.estimators[name].error, second.estimators[name].error)
    assert not np.array_equal(first.estimators["scm"].error, other.estimators["scm"].error)
    assert first.estimators["r"].alpha > 0


def test_experiment_rows_and_bound():
    config = _config()
    points = []
    result = run_experiment(config, on_point=lambda partial: points.append(len(partial.points)))
    assert points == [1, 2]
    assert len(result.rows()) == 2 * (3 + 1)
    for point, value in zip(result.points, config.sweep):
        assert point.sweep_value == value
        standalone = sscrb(config.scene, config.spec_at(config.sweep.index(value)), config.snapshots)
        assert point.sscrb_index == standalone.index
        for summary in point.estimators.values():
            assert summary.successes + summary.outliers + summary.failures == config.runs
            assert summary.mse_index >= 0
    assert np.all(result.sscrb() > 0)


def test_results_independent_of_worker_count():
    config = _config(runs=8)
    serial = run_experiment(config, workers=1)
    parallel = MonteCarloRunner(config, workers=2, chunk_size=3).run()
    assert result_frame(serial).equals(result_frame(parallel))


def test_single_run_is_reproducible():
    config = _config(sweep=[1e4], runs=1)
    assert result_frame(run_experiment(config)).equals(result_frame(run_experiment(config)))


def test_estimator_subset():
    result = run_experiment(_config(estimators=("scm",), sweep=[5.0], runs=3))
    assert list(result.points[0].estimators) == ["scm"]
    assert [row["estimator"] for row in result.rows()] == ["scm", "sscrb"]


def _bundled(name):
    return load_experiment_config(os.path.join(CONFIG_DIR, name))


@pytest.mark.slow
def test_t_sweep_reproduces_reference_ordering():
    config = _bundled('fig1.cfg')
    result = run_experiment(config, workers=os.cpu_count() or 1)
    scm, tyler, r = result.mse("scm"), result.mse("tyler"), result.mse("r")
    assert np.all(r <= tyler)
    assert scm[0] >= 2 * scm[-1]
    assert np.all(np.abs(tyler / tyler.mean() - 1) < 0.15)
    for mse in (scm, tyler, r):
        assert np.all(mse >= result.sscrb())


@pytest.mark.slow
def test_gg_sweep_reproduces_reference_ordering():
    config = _bundled('fig2.cfg')
    result = run_experiment(config, workers=os.cpu_count() or 1)
    s = np.array(config.sweep)
    scm, tyler, r = result.mse("scm"), result.mse("tyler"), result.mse("r")
    heavy = s <= 0.5
    assert np.all(r[heavy] <= 1.05 * np.minimum(scm[heavy], tyler[heavy]))
    near_gaussian = np.isin(s, [1.0, 2.0])
    assert np.all(np.abs(r[near_gaussian] / scm[near_gaussian] - 1) < 0.15)
    light = np.isin(s, [1.0, 2.0, 4.0])
    assert np.all(scm[light] < tyler[light])
