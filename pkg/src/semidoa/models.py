#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Data Models for semidoa
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gammaln

from .exceptions import ConfigurationError, DomainError


class Family(Enum):
    """Density generator family of a CES distribution"""
    GAUSSIAN = "gaussian"
    STUDENT_T = "t"
    GENERALIZED_GAUSSIAN = "gg"

    @classmethod
    def parse(cls, value: str) -> "Family":
        aliases = {
            "gaussian": cls.GAUSSIAN,
            "normal": cls.GAUSSIAN,
            "t": cls.STUDENT_T,
            "student-t": cls.STUDENT_T,
            "studentt": cls.STUDENT_T,
            "gg": cls.GENERALIZED_GAUSSIAN,
            "generalized-gaussian": cls.GENERALIZED_GAUSSIAN,
        }
        key = str(value).strip().lower()
        if key not in aliases:
            raise ConfigurationError(f"Unknown distribution family: {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class DensityGeneratorSpec:
    """Choice of density generator h0 together with its shape parameter

    `lam` is the t degrees of freedom (> 1), `s` the GG shape exponent (> 0).
    The scale (eta for t, b for GG) is derived so that E{Q} = N.
    """

    family: Family
    lam: Optional[float] = None
    s: Optional[float] = None

    def __post_init__(self):
        if self.family is Family.STUDENT_T:
            if self.lam is None or not np.isfinite(self.lam) or self.lam <= 1:
                raise DomainError(f"t degrees of freedom must be > 1, got {self.lam}")
        elif self.family is Family.GENERALIZED_GAUSSIAN:
            if self.s is None or not np.isfinite(self.s) or self.s <= 0:
                raise DomainError(f"GG shape parameter must be > 0, got {self.s}")

    @classmethod
    def gaussian(cls) -> "DensityGeneratorSpec":
        return cls(Family.GAUSSIAN)

    @classmethod
    def student_t(cls, lam: float) -> "DensityGeneratorSpec":
        return cls(Family.STUDENT_T, lam=float(lam))

    @classmethod
    def generalized_gaussian(cls, s: float) -> "DensityGeneratorSpec":
        return cls(Family.GENERALIZED_GAUSSIAN, s=float(s))

    @classmethod
    def for_sweep(cls, family: Family, value: Optional[float]) -> "DensityGeneratorSpec":
        """Spec for one point of a non-Gaussianity sweep"""
        if family is Family.STUDENT_T:
            return cls.student_t(value)
        if family is Family.GENERALIZED_GAUSSIAN:
            return cls.generalized_gaussian(value)
        return cls.gaussian()

    @property
    def eta(self) -> float:
        """t scale eta = lambda / (lambda - 1)"""
        if self.family is not Family.STUDENT_T:
            raise DomainError("eta is only defined for the t family")
        return self.lam / (self.lam - 1.0)

    def log_b(self, n: int) -> float:
        """log of the GG scale b = [N Gamma(N/s) / Gamma((N+1)/s)]^s"""
        if self.family is not Family.GENERALIZED_GAUSSIAN:
            raise DomainError("b is only defined for the GG family")
        s = self.s
        return s * (np.log(n) + gammaln(n / s) - gammaln((n + 1) / s))

    def b(self, n: int) -> float:
        return float(np.exp(self.log_b(n)))

    @property
    def sweep_value(self) -> Optional[float]:
        if self.family is Family.STUDENT_T:
            return self.lam
        if self.family is Family.GENERALIZED_GAUSSIAN:
            return self.s
        return None

    @property
    def label(self) -> str:
        if self.family is Family.STUDENT_T:
            return f"t(lambda={self.lam:g})"
        if self.family is Family.GENERALIZED_GAUSSIAN:
            return f"gg(s={self.s:g})"
        return "gaussian"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "family": self.family.value,
            "lambda": self.lam,
            "s": self.s,
        }


@dataclass
class SnapshotSet:
    """L snapshots z_1..z_L stored as rows of an (L, N) complex array"""

    data: np.ndarray
    seed: Optional[int] = None
    generator: Optional[DensityGeneratorSpec] = None
    stream_key: Tuple[int, ...] = ()

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.ndim != 2:
            raise DomainError(f"Snapshot data must be 2-D (L, N), got shape {self.data.shape}")
        if self.data.shape[0] < 1:
            raise DomainError("A snapshot set needs at least one snapshot")

    @property
    def n_sensors(self) -> int:
        return self.data.shape[1]

    @property
    def n_snapshots(self) -> int:
        return self.data.shape[0]

    def scaled(self, factors) -> "SnapshotSet":
        """Copy with each snapshot multiplied by a positive factor (scalar or length L)"""
        factors = np.asarray(factors, dtype=float)
        if factors.ndim == 0:
            factors = np.full(self.n_snapshots, float(factors))
        return SnapshotSet(self.data * factors[:, None], self.seed, self.generator, self.stream_key)

    def metadata(self) -> Dict[str, Any]:
        meta = {
            "N": self.n_sensors,
            "L": self.n_snapshots,
            "seed": self.seed,
            "stream_key": ",".join(str(k) for k in self.stream_key),
        }
        if self.generator is not None:
            meta.update(self.generator.to_dict())
        return meta


@dataclass
class SourceScene:
    """Spatial frequencies, source correlation matrix and noise power of a scene"""

    n_sensors: int
    nu: np.ndarray
    gamma: np.ndarray
    sigma2: float = 1.0

    def __post_init__(self):
        self.nu = np.atleast_1d(np.asarray(self.nu, dtype=float))
        k = self.nu.size
        self.gamma = np.asarray(self.gamma, dtype=complex).reshape(k, k)
        self.sigma2 = float(self.sigma2)
        errors = []

        if self.n_sensors < 2:
            errors.append(f"N must be >= 2, got {self.n_sensors}")
        if k >= self.n_sensors:
            errors.append(f"number of sources K={k} must be < N={self.n_sensors}")
        if not np.all(np.isfinite(self.nu)):
            errors.append("spatial frequencies must be finite")
        else:
            self.nu = wrap_frequency(self.nu)
            gaps = np.abs(self.nu[:, None] - self.nu[None, :])
            gaps = np.minimum(gaps, 1.0 - gaps)[~np.eye(k, dtype=bool)]
            if gaps.size and gaps.min() <= 0:
                errors.append(f"spatial frequencies must be pairwise distinct: {self.nu}")
        if not self.sigma2 > 0:
            errors.append(f"noise power must be > 0, got {self.sigma2}")
        if k:
            if not np.allclose(self.gamma, self.gamma.conj().T, atol=1e-12):
                errors.append("source correlation matrix must be Hermitian")
            elif np.linalg.eigvalsh(self.gamma).min() < -1e-12 * max(np.abs(self.gamma).max(), 1.0):
                errors.append("source correlation matrix must be positive semidefinite")

        if errors:
            raise DomainError(f"Invalid source scene: {'; '.join(errors)}")

    @property
    def n_sources(self) -> int:
        return self.nu.size

    @classmethod
    def from_powers(cls, n_sensors: int, nu, powers, rho: float = 0.0,
                    sigma2: float = 1.0) -> "SourceScene":
        """Scene with source powers sigma_k^2 and a common correlation coefficient rho"""
        powers = np.atleast_1d(np.asarray(powers, dtype=float))
        amplitudes = np.sqrt(powers)
        gamma = rho * np.outer(amplitudes, amplitudes)
        np.fill_diagonal(gamma, powers)
        return cls(n_sensors, nu, gamma, sigma2)

    @classmethod
    def from_snr(cls, n_sensors: int, nu, snr_db: float, rho: float = 0.0,
                 sigma2: float = 1.0) -> "SourceScene":
        """Equal-power sources with sigma_k^2 = sigma0^2 * 10^(SNR/10)"""
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        power = sigma2 * 10.0 ** (snr_db / 10.0)
        return cls.from_powers(n_sensors, nu, np.full(nu.size, power), rho, sigma2)

    @classmethod
    def reference_scene(cls) -> "SourceScene":
        """Two correlated sources at 0.1 and 0.2, SNR 5 dB, rho 0.5, N = 8"""
        return cls.from_snr(8, [0.1, 0.2], snr_db=5.0, rho=0.5, sigma2=1.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.n_sensors,
            "K": self.n_sources,
            "nu": " ".join(f"{v:.17g}" for v in self.nu),
            "sigma0sq": self.sigma2,
            "gamma_re": " ".join(f"{v:.17g}" for v in self.gamma.real.ravel()),
            "gamma_im": " ".join(f"{v:.17g}" for v in self.gamma.imag.ravel()),
        }


def wrap_frequency(nu):
    """Map spatial frequencies into [-0.5, 0.5)"""
    return np.mod(np.asarray(nu, dtype=float) + 0.5, 1.0) - 0.5


@dataclass
class EstimatorDiagnostics:
    """Per-estimation record: iterations, residual, alpha, PD repair, failure reason"""

    estimator: str
    iterations: int = 0
    residual: float = float("nan")
    alpha: Optional[float] = None
    pd_repaired: bool = False
    failure: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return self.failure is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimator": self.estimator,
            "iterations": self.iterations,
            "residual": self.residual,
            "alpha": self.alpha,
            "pd_repaired": self.pd_repaired,
            "failure": self.failure,
        }


@dataclass
class ShapeMatrix:
    """Hermitian PD shape matrix normalized so that V[0, 0] == 1"""

    matrix: np.ndarray
    diagnostics: Optional[EstimatorDiagnostics] = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DomainError(f"Shape matrix must be square, got {self.matrix.shape}")
        if self.matrix[0, 0] != 1:
            raise DomainError(f"Shape matrix top-left entry must be 1, got {self.matrix[0, 0]}")
        scale = max(np.linalg.norm(self.matrix), 1.0)
        if np.linalg.norm(self.matrix - self.matrix.conj().T) > 1e-10 * scale:
            raise DomainError("Shape matrix must be Hermitian")

    @classmethod
    def from_scatter(cls, scatter: np.ndarray,
                     diagnostics: Optional[EstimatorDiagnostics] = None) -> "ShapeMatrix":
        """Normalize a scatter matrix by its top-left entry"""
        scatter = np.asarray(scatter, dtype=complex)
        top_left = scatter[0, 0].real
        if not top_left > 0:
            raise DomainError(f"Scatter matrix top-left entry must be > 0, got {scatter[0, 0]}")
        v = scatter / top_left
        v = 0.5 * (v + v.conj().T)
        np.fill_diagonal(v, v.diagonal().real)
        v[0, 0] = 1.0
        return cls(v, diagnostics)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass
class RankStatistics:
    """Squared Mahalanobis norms, their ranks and the normalized directions"""

    q_star: np.ndarray
    ranks: np.ndarray
    u_star: np.ndarray


@dataclass
class Pseudospectrum:
    """MUSIC pseudospectrum on a uniform grid over [-0.5, 0.5)"""

    grid: np.ndarray
    values: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.size


@dataclass
class DoaEstimate:
    """Spatial-frequency estimates, sorted ascending"""

    frequencies: np.ndarray
    peak_values: np.ndarray
    peaks_found: int = 0
    fallback: bool = False
    refinement: str = "none"

    def to_dict(self) -> Dict[str, Any]:
        row = {f"nu_{k + 1}": float(v) for k, v in enumerate(self.frequencies)}
        row.update({
            "peaks_found": self.peaks_found,
            "fallback": self.fallback,
            "refinement": self.refinement,
        })
        return row


@dataclass
class BoundResult:
    """Semiparametric stochastic CRB on the spatial frequencies"""

    matrix: np.ndarray
    index: float
    scalar_factor: float
    trace: float
    condition_number: float
    sweep_value: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sweep_param": self.sweep_value,
            "scalar_factor": self.scalar_factor,
            "index": self.index,
            "trace": self.trace,
            "condition_number": self.condition_number,
        }


ESTIMATOR_NAMES = ("scm", "tyler", "r")


@dataclass
class ExperimentConfig:
    """Definition of a Monte Carlo sweep over a non-Gaussianity parameter"""

    scene: SourceScene
    family: Family
    sweep: List[float]
    snapshots: int
    runs: int = 2000
    master_seed: int = 0
    estimators: Tuple[str, ...] = ESTIMATOR_NAMES
    grid_size: int = 4096
    refine: str = "parabolic"
    exclude_outliers: bool = False
    outlier_threshold: float = 0.1

    def __post_init__(self):
        self.sweep = [float(v) for v in self.sweep]
        self.estimators = tuple(self.estimators)
        errors = []
        if self.runs < 1:
            errors.append(f"runs must be >= 1, got {self.runs}")
        if not self.sweep:
            errors.append("sweep must not be empty")
        if self.snapshots < self.scene.n_sensors:
            errors.append(f"snapshots L={self.snapshots} must be >= N={self.scene.n_sensors}")
        unknown = [e for e in self.estimators if e not in ESTIMATOR_NAMES]
        if unknown or not self.estimators:
            errors.append(f"estimators must be a non-empty subset of {ESTIMATOR_NAMES}, got {self.estimators}")
        if self.grid_size < 64:
            errors.append(f"grid_size must be >= 64, got {self.grid_size}")
        if not 0 <= self.master_seed < 2 ** 64:
            errors.append(f"seed must be an unsigned 64-bit integer, got {self.master_seed}")
        if not self.outlier_threshold > 0:
            errors.append(f"outlier_threshold must be > 0, got {self.outlier_threshold}")
        if errors:
            raise ConfigurationError(f"Configuration validation failed: {'; '.join(errors)}")
        for value in self.sweep:
            DensityGeneratorSpec.for_sweep(self.family, value)

    def spec_at(self, sweep_index: int) -> DensityGeneratorSpec:
        return DensityGeneratorSpec.for_sweep(self.family, self.sweep[sweep_index])

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "family": self.family.value,
            "sweep": " ".join(f"{v:g}" for v in self.sweep),
            "snapshots": self.snapshots,
            "runs": self.runs,
            "seed": self.master_seed,
            "estimators": ",".join(self.estimators),
            "grid_size": self.grid_size,
            "refine": self.refine,
            "exclude_outliers": self.exclude_outliers,
            "outlier_threshold": self.outlier_threshold,
        }
        data.update({f"scene.{k}": v for k, v in self.scene.to_dict().items()})
        return data


@dataclass
class EstimatorSummary:
    """Accumulated statistics of one estimator at one sweep point"""

    estimator: str
    mse_index: float
    std_error: float
    runs: int
    successes: int
    outliers: int
    failures: int
    mean_iterations: float = float("nan")
    mean_alpha: float = float("nan")
    pd_repairs: int = 0
    fallbacks: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "estimator": self.estimator,
            "mse_index": self.mse_index,
            "std_error": self.std_error,
            "runs": self.runs,
            "successes": self.successes,
            "outliers": self.outliers,
            "failures": self.failures,
            "mean_iterations": self.mean_iterations,
            "mean_alpha": self.mean_alpha,
            "pd_repairs": self.pd_repairs,
            "fallbacks": self.fallbacks,
        }


@dataclass
class SweepPointResult:
    sweep_value: float
    bound: Optional[BoundResult]
    estimators: Dict[str, EstimatorSummary] = field(default_factory=dict)
    bound_error: Optional[str] = None

    @property
    def sscrb_index(self) -> float:
        return self.bound.index if self.bound is not None else float("nan")


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    points: List[SweepPointResult] = field(default_factory=list)

    def mse(self, estimator: str) -> np.ndarray:
        return np.array([p.estimators[estimator].mse_index for p in self.points])

    def sscrb(self) -> np.ndarray:
        return np.array([p.sscrb_index for p in self.points])

    def rows(self) -> List[Dict[str, Any]]:
        """One row per (sweep point, estimator) plus one bound row per sweep point"""
        rows = []
        for point in self.points:
            for name, summary in point.estimators.items():
                row = {"sweep_param": point.sweep_value}
                row.update(summary.to_dict())
                row["sscrb_index"] = point.sscrb_index
                row["efficiency_ratio"] = summary.mse_index / point.sscrb_index
                rows.append(row)
            rows.append({
                "sweep_param": point.sweep_value,
                "estimator": "sscrb",
                "mse_index": point.sscrb_index,
                "runs": 0,
                "outliers": 0,
                "sscrb_index": point.sscrb_index,
            })
        return rows
