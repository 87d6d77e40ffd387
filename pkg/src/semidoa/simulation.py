#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Monte Carlo experiment engine
Sweeps a non-Gaussianity parameter, runs paired SCM / Tyler / R trials per
point and compares MUSIC MSE indices with the SSCRB index
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .array_model import build_covariance
from .bound import sscrb
from .ces import synthesize_snapshots
from .estimators import TYLER_MAX_ITER, TYLER_TOL, estimate_all
from .exceptions import SemidoaError
from .models import (EstimatorSummary, ExperimentConfig, ExperimentResult,
                     SweepPointResult, wrap_frequency)
from .music import estimate_doa

logger = logging.getLogger(__name__)

MAX_PAIRING_SOURCES = 6


def circular_distance(a, b) -> np.ndarray:
    """min(|a - b|, 1 - |a - b|) elementwise"""
    return np.abs(wrap_frequency(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def pair_frequencies(estimate, truth) -> np.ndarray:
    """Permutation of `estimate` with the smallest total circular distance to `truth`

    Exhaustive over K! orderings; the first minimizer in lexicographic
    permutation order wins.
    """
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape or estimate.ndim != 1:
        raise ValueError(f"cannot pair {estimate.shape} estimates with {truth.shape} true frequencies")
    if estimate.size > MAX_PAIRING_SOURCES:
        raise ValueError(f"exhaustive pairing supports at most {MAX_PAIRING_SOURCES} sources")
    best, best_cost = estimate, math.inf
    for perm in itertools.permutations(range(estimate.size)):
        candidate = estimate[list(perm)]
        cost = float(circular_distance(candidate, truth).sum())
        if cost < best_cost:
            best, best_cost = candidate, cost
    return best


def frequency_error(paired, truth) -> np.ndarray:
    """Signed estimation error wrapped into [-0.5, 0.5)"""
    return wrap_frequency(np.asarray(paired, dtype=float) - np.asarray(truth, dtype=float))


def outer_product_norm(error) -> float:
    """||e e^T||_F, which equals ||e||_2^2"""
    error = np.asarray(error, dtype=float)
    value = float(np.linalg.norm(np.outer(error, error), "fro"))
    assert math.isclose(value, float(error @ error), rel_tol=1e-12, abs_tol=1e-300)
    return value


def mse_index(paired_estimates, truth) -> float:
    """Sample mean of ||(nu_hat - nu0)(nu_hat - nu0)^T||_F over trials (rows)"""
    paired_estimates = np.atleast_2d(np.asarray(paired_estimates, dtype=float))
    if paired_estimates.shape[0] < 1:
        raise ValueError("mse_index needs at least one trial")
    return float(np.mean([outer_product_norm(frequency_error(row, truth)) for row in paired_estimates]))


@dataclass
class EstimatorOutcome:
    """Result of one estimator on one trial"""

    error: Optional[np.ndarray] = None
    failure: Optional[str] = None
    iterations: int = 0
    alpha: Optional[float] = None
    pd_repaired: bool = False
    fallback: bool = False


@dataclass
class TrialOutcome:
    sweep_index: int
    trial: int
    estimators: Dict[str, EstimatorOutcome] = field(default_factory=dict)


def run_trial(config: ExperimentConfig, sweep_index: int, trial: int,
              sigma: Optional[np.ndarray] = None) -> TrialOutcome:
    """One paired trial: all estimators consume the same snapshot set"""
    if sigma is None:
        sigma = build_covariance(config.scene)
    spec = config.spec_at(sweep_index)
    k = config.scene.n_sources
    truth = config.scene.nu
    snapshots = synthesize_snapshots(sigma, spec, config.snapshots, config.master_seed,
                                     stream_key=(sweep_index, trial))
    outcome = TrialOutcome(sweep_index, trial)
    shapes = estimate_all(snapshots, config.estimators, TYLER_TOL, TYLER_MAX_ITER)
    for name in config.estimators:
        shape = shapes[name]
        if isinstance(shape, Exception):
            outcome.estimators[name] = EstimatorOutcome(failure=f"{type(shape).__name__}: {shape}")
            continue
        diagnostics = shape.diagnostics
        record = EstimatorOutcome(
            iterations=diagnostics.iterations if diagnostics else 0,
            alpha=diagnostics.alpha if diagnostics else None,
            pd_repaired=diagnostics.pd_repaired if diagnostics else False,
        )
        try:
            doa = estimate_doa(shape, k, config.grid_size, config.refine)
        except SemidoaError as e:
            record.failure = f"{type(e).__name__}: {e}"
        else:
            record.fallback = doa.fallback
            record.error = frequency_error(pair_frequencies(doa.frequencies, truth), truth)
        outcome.estimators[name] = record
    return outcome


def _run_chunk(config: ExperimentConfig, sweep_index: int, trials: Sequence[int]) -> List[TrialOutcome]:
    sigma = build_covariance(config.scene)
    return [run_trial(config, sweep_index, t, sigma) for t in trials]


def _chunks(runs: int, size: int) -> List[range]:
    return [range(start, min(start + size, runs)) for start in range(0, runs, size)]


def summarize(name: str, outcomes: Sequence[TrialOutcome], exclude_outliers: bool = False,
              outlier_threshold: float = 0.1) -> EstimatorSummary:
    """Reduce trial outcomes (in trial order) for one estimator

    Every trial is counted exactly once as a success, an outlier or a
    failure. Outliers enter the MSE index unless exclude_outliers is set.
    """
    errors_sq = []
    successes = outliers = failures = pd_repairs = fallbacks = 0
    iterations, alphas = [], []
    for outcome in outcomes:
        record = outcome.estimators[name]
        if record.failure is not None:
            failures += 1
            logger.warning(f"{name} failed on trial {outcome.trial}: {record.failure}")
            continue
        iterations.append(record.iterations)
        if record.alpha is not None:
            alphas.append(record.alpha)
        pd_repairs += int(record.pd_repaired)
        fallbacks += int(record.fallback)
        is_outlier = bool(np.max(np.abs(record.error)) > outlier_threshold)
        if is_outlier:
            outliers += 1
            if exclude_outliers:
                continue
        else:
            successes += 1
        errors_sq.append(outer_product_norm(record.error))

    runs = len(outcomes)
    assert successes + outliers + failures == runs
    values = np.array(errors_sq)
    mse = float(values.mean()) if values.size else float("nan")
    std_error = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else float("nan")
    return EstimatorSummary(
        estimator=name,
        mse_index=mse,
        std_error=std_error,
        runs=runs,
        successes=successes,
        outliers=outliers,
        failures=failures,
        mean_iterations=float(np.mean(iterations)) if iterations else float("nan"),
        mean_alpha=float(np.mean(alphas)) if alphas else float("nan"),
        pd_repairs=pd_repairs,
        fallbacks=fallbacks,
    )


class MonteCarloRunner:
    """Runs an ExperimentConfig sweep point by sweep point"""

    def __init__(self, config: ExperimentConfig, workers: int = 1, progress: bool = False,
                 chunk_size: Optional[int] = None):
        self.config = config
        self.workers = max(1, int(workers))
        self.progress = progress
        self.chunk_size = chunk_size or max(1, math.ceil(config.runs / (4 * self.workers)))

        logger.info("Monte Carlo experiment configured:")
        logger.info(f"  - family: {config.family.value}, sweep: {config.sweep}")
        logger.info(f"  - N={config.scene.n_sensors}, K={config.scene.n_sources}, L={config.snapshots}")
        logger.info(f"  - runs per point: {config.runs}, seed: {config.master_seed}")
        logger.info(f"  - estimators: {', '.join(config.estimators)}, workers: {self.workers}")

    def _trial_outcomes(self, sweep_index: int, executor: Optional[ProcessPoolExecutor]) -> Iterator[List[TrialOutcome]]:
        chunks = _chunks(self.config.runs, self.chunk_size)
        if executor is None:
            return (_run_chunk(self.config, sweep_index, c) for c in chunks)
        # map yields in submission order, so reduction order does not depend on scheduling
        return executor.map(_run_chunk, itertools.repeat(self.config), itertools.repeat(sweep_index), chunks)

    def run_point(self, sweep_index: int, executor: Optional[ProcessPoolExecutor] = None) -> SweepPointResult:
        config = self.config
        value = config.sweep[sweep_index]
        spec = config.spec_at(sweep_index)
        logger.info(f"Sweep point {sweep_index + 1}/{len(config.sweep)}: {spec.label}")

        outcomes: List[TrialOutcome] = []
        with tqdm(total=config.runs, desc=spec.label, unit="trial", disable=not self.progress) as bar:
            for chunk in self._trial_outcomes(sweep_index, executor):
                outcomes.extend(chunk)
                bar.update(len(chunk))

        point = SweepPointResult(sweep_value=value, bound=None)
        for name in config.estimators:
            point.estimators[name] = summarize(name, outcomes, config.exclude_outliers,
                                               config.outlier_threshold)
        try:
            point.bound = sscrb(config.scene, spec, config.snapshots)
        except SemidoaError as e:
            point.bound_error = str(e)
            logger.warning(f"SSCRB unavailable at {spec.label}: {e}")

        summary = ", ".join(f"{n}={s.mse_index:.3e}" for n, s in point.estimators.items())
        logger.info(f"Finished {spec.label}: {summary}, sscrb={point.sscrb_index:.3e}")
        return point

    def run(self, on_point: Optional[Callable[[ExperimentResult], None]] = None) -> ExperimentResult:
        """Run all sweep points; on_point receives the partial result after each point"""
        result = ExperimentResult(self.config)
        executor = ProcessPoolExecutor(max_workers=self.workers) if self.workers > 1 else None
        try:
            for sweep_index in range(len(self.config.sweep)):
                result.points.append(self.run_point(sweep_index, executor))
                if on_point is not None:
                    on_point(result)
        finally:
            if executor is not None:
                executor.shutdown(cancel_futures=True)
        return result


def run_experiment(config: ExperimentConfig, workers: int = 1, progress: bool = False,
                   on_point: Optional[Callable[[ExperimentResult], None]] = None) -> ExperimentResult:
    """Deterministic Monte Carlo sweep; identical results for any worker count"""
    return MonteCarloRunner(config, workers, progress).run(on_point)
