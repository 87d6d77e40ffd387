#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Complex Elliptically Symmetric (CES) distribution machinery

Density generators h0 and scores psi0 = d ln h0 / dt for the Gaussian,
Student-t and Generalized Gaussian families, the law of the 2nd-order
modular variate Q, samplers for the stochastic representation
z = sqrt(Q) Sigma^{1/2} u, and the score moment E{Q^2 psi0(Q)^2}.

All density generators carry the normalization constants of the CES pdf
|Sigma|^{-1} h0(z^H Sigma^{-1} z), so p_Q(q) = pi^N / Gamma(N) q^{N-1} h0(q)
integrates to one and E{Q} = N for every family.
"""

import logging
import warnings
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln, xlogy

from .exceptions import DomainError, QuadratureError
from .hermitian import hermitian_sqrt_inv
from .models import DensityGeneratorSpec, Family, SnapshotSet

logger = logging.getLogger(__name__)

LOG_PI = np.log(np.pi)


def random_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent pseudorandom stream for (seed, key...)

    Streams for different keys are statistically independent and do not
    depend on the order in which they are created.
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


def _check_t(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise DomainError("density generator argument t must be >= 0")
    return t


def log_density_generator(spec: DensityGeneratorSpec, n: int, t) -> np.ndarray:
    """ln h0(t), including the family normalization constants"""
    t = _check_t(t)
    if spec.family is Family.GAUSSIAN:
        return -n * LOG_PI - t
    if spec.family is Family.STUDENT_T:
        lam = spec.lam
        c = lam / spec.eta
        # lam*ln(c) - (lam+N)*ln(c+t) rewritten to stay accurate for large lambda
        return (gammaln(lam + n) - gammaln(lam) - n * LOG_PI
                - n * np.log(c) - (lam + n) * np.log1p(t / c))
    s = spec.s
    log_b = spec.log_b(n)
    with np.errstate(divide="ignore"):
        t_pow = np.exp(s * np.log(t) - log_b)
    return (np.log(s) + gammaln(n) - (n / s) * log_b - n * LOG_PI - gammaln(n / s) - t_pow)


def density_generator_h(spec: DensityGeneratorSpec, n: int, t) -> np.ndarray:
    """h0(t) of the selected family with the constraint-satisfying scale baked in"""
    return np.exp(log_density_generator(spec, n, t))


def score_psi(spec: DensityGeneratorSpec, n: int, t) -> np.ndarray:
    """psi0(t) = d ln h0(t) / dt"""
    t = _check_t(t)
    if spec.family is Family.GAUSSIAN:
        return -np.ones_like(t)
    if spec.family is Family.STUDENT_T:
        c = spec.lam / spec.eta
        return -(spec.lam + n) / (c + t)
    s = spec.s
    if s < 1 and np.any(t == 0):
        raise DomainError(f"GG score is singular at t=0 for s={s} < 1")
    with np.errstate(divide="ignore"):
        return -(s / spec.b(n)) * np.power(t, s - 1.0)


def modular_log_pdf(spec: DensityGeneratorSpec, n: int, q) -> np.ndarray:
    """ln p_Q(q) = N ln(pi) - ln Gamma(N) + (N-1) ln q + ln h0(q)"""
    q = _check_t(q)
    with np.errstate(divide="ignore"):
        return n * LOG_PI - gammaln(n) + xlogy(n - 1, q) + log_density_generator(spec, n, q)


def modular_pdf(spec: DensityGeneratorSpec, n: int, q) -> np.ndarray:
    return np.exp(modular_log_pdf(spec, n, q))


def score_moment(spec: DensityGeneratorSpec, n: int) -> float:
    """E{Q^2 psi0(Q)^2} in closed form

    Gaussian: N(N+1). t: N(N+1)(lambda+N)/(lambda+N+1) since Q/(c+Q) is
    Beta(N, lambda). GG: N(N+s) since Q^s/b is Gamma(N/s, 1).
    """
    if spec.family is Family.GAUSSIAN:
        return float(n * (n + 1))
    if spec.family is Family.STUDENT_T:
        lam = spec.lam
        return float(n * (n + 1) * (lam + n) / (lam + n + 1))
    return float(n * (n + spec.s))


def _expect(spec: DensityGeneratorSpec, n: int,
            log_weight: Callable[[np.ndarray], np.ndarray]) -> float:
    """E{g(Q)} for g = exp(log_weight) > 0 by adaptive quadrature in x = ln q

    The integrand is rescaled by its peak so that tolerances are relative.
    """
    def log_integrand(x):
        # keep q > 0 in the far left tail, where psi may be singular at 0
        q = np.exp(max(x, -700.0))
        return log_weight(q) + modular_log_pdf(spec, n, q) + x

    guess = np.log(n)
    peak = optimize.minimize_scalar(lambda x: -log_integrand(x), bracket=(guess - 1.0, guess + 1.0))
    mode = float(peak.x)
    top = float(log_integrand(mode))
    h = 1e-3
    curvature = (log_integrand(mode + h) - 2 * top + log_integrand(mode - h)) / h ** 2
    width = 1.0 / np.sqrt(-curvature) if curvature < 0 else 1.0

    def scaled(x):
        with np.errstate(over="ignore", invalid="ignore"):
            value = float(np.exp(log_integrand(x) - top))
        return value if np.isfinite(value) else 0.0

    breaks = mode + width * np.array([-40.0, -10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0, 40.0])
    pieces = [(-np.inf, breaks[0])] + list(zip(breaks[:-1], breaks[1:])) + [(breaks[-1], np.inf)]
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            for lo, hi in pieces:
                value, _ = integrate.quad(scaled, lo, hi, epsabs=1e-14, epsrel=1e-12, limit=500)
                total += value
        except integrate.IntegrationWarning as e:
            raise QuadratureError(f"Quadrature did not converge for {spec.label}, N={n}: {e}") from e
    return float(total * np.exp(top))


def score_moment_quadrature(spec: DensityGeneratorSpec, n: int) -> float:
    """E{Q^2 psi0(Q)^2} by quadrature against p_Q (oracle for score_moment)"""
    def log_weight(q):
        return 2.0 * np.log(q) + 2.0 * np.log(np.abs(score_psi(spec, n, q)))
    return _expect(spec, n, log_weight)


def modular_moment(spec: DensityGeneratorSpec, n: int, order: float = 1.0) -> float:
    """E{Q^order} by quadrature"""
    return _expect(spec, n, lambda q: order * np.log(q))


def sample_modular_variate(spec: DensityGeneratorSpec, n: int, rng: np.random.Generator,
                           size: Optional[int] = None) -> np.ndarray:
    """Draw Q with E{Q} = N

    Gaussian: Gamma(N, 1). t: (lambda/eta) G1/G2 with G1 ~ Gamma(N, 1),
    G2 ~ Gamma(lambda, 1). GG: (b W)^{1/s} with W ~ Gamma(N/s, 1).
    """
    if spec.family is Family.GAUSSIAN:
        return rng.gamma(n, 1.0, size)
    if spec.family is Family.STUDENT_T:
        g1 = rng.gamma(n, 1.0, size)
        g2 = rng.gamma(spec.lam, 1.0, size)
        return (spec.lam / spec.eta) * g1 / g2
    # Gamma draws with a small shape can underflow to 0
    w = np.maximum(rng.gamma(n / spec.s, 1.0, size), np.finfo(float).tiny)
    return np.exp((spec.log_b(n) + np.log(w)) / spec.s)


def sample_unit_sphere(n: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Uniform draws on the complex unit N-sphere (rows when size is given)"""
    if n < 1:
        raise DomainError(f"N must be >= 1, got {n}")
    shape = (n,) if size is None else (size, n)
    g = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def synthesize_snapshots(sigma: np.ndarray, spec: DensityGeneratorSpec, n_snapshots: int,
                         seed: int, stream_key: Tuple[int, ...] = ()) -> SnapshotSet:
    """L i.i.d. CES snapshots z_l = sqrt(Q_l) Sigma^{1/2} u_l, deterministic in (seed, stream_key)"""
    if n_snapshots < 1:
        raise DomainError(f"number of snapshots must be >= 1, got {n_snapshots}")
    sigma = np.asarray(sigma, dtype=complex)
    n = sigma.shape[0]
    sqrt_sigma, _ = hermitian_sqrt_inv(sigma)
    rng = random_stream(seed, *stream_key)
    q = sample_modular_variate(spec, n, rng, n_snapshots)
    u = sample_unit_sphere(n, rng, n_snapshots)
    # rows: z_l^T = sqrt(Q_l) u_l^T Sigma^{T/2}
    data = np.sqrt(q)[:, None] * (u @ sqrt_sigma.T)
    logger.debug(f"Synthesized {n_snapshots} snapshots, N={n}, {spec.label}, seed={seed}, key={stream_key}")
    return SnapshotSet(data, seed=seed, generator=spec, stream_key=tuple(stream_key))


def ces_log_pdf(z: np.ndarray, sigma: np.ndarray, spec: DensityGeneratorSpec) -> np.ndarray:
    """ln of |Sigma|^{-1} h0(z^H Sigma^{-1} z) for rows of z"""
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    sigma = np.asarray(sigma, dtype=complex)
    n = sigma.shape[0]
    _, log_det = np.linalg.slogdet(sigma)
    quad = np.real(np.einsum("li,li->l", z.conj(), np.linalg.solve(sigma, z.T).T))
    return -log_det + log_density_generator(spec, n, np.maximum(quad, 0.0))
