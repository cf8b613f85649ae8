"""Divergence evaluation bench.

Closed-form expected pinball loss, the numeric quantile divergence between a
reference distribution and an arbitrary quantile function, the empirical 1-D
Wasserstein distance, and the Frechet distance between moment summaries.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .distributions import AnalyticDist
from .errors import AiqnError, DomainError
from .linalg import psd_sqrt, trace_sqrt
from .quadrature import integrate

# Gaussian-family quantiles diverge at tau in {0, 1}; integration over tau is
# truncated symmetrically.  The Monte-Carlo companions in the test suite draw
# tau from the same truncated interval for consistency.
TAU_EPS = 1e-4


@dataclass
class QuantileFn:
    """A quantile function tau in (0,1) -> real, optionally checked monotone."""

    fn: Callable[[float], float]
    monotone: bool = False

    def __post_init__(self):
        if self.monotone:
            grid = np.linspace(0.01, 0.99, 99)
            vals = [self.fn(t) for t in grid]
            if np.any(np.diff(vals) < 0):
                raise DomainError("quantile function declared monotone is decreasing on the tau grid")

    def __call__(self, tau: float) -> float:
        return float(self.fn(tau))

    @classmethod
    def from_dist(cls, dist: AnalyticDist) -> "QuantileFn":
        return cls(dist.quantile, monotone=True)

    @classmethod
    def from_samples(cls, samples: np.ndarray) -> "QuantileFn":
        """Empirical (order-statistics) quantile function of a sample set."""
        sorted_samples = np.sort(np.asarray(samples, dtype=np.float64).ravel())
        m = sorted_samples.size
        if m < 1:
            raise DomainError("empirical quantile function needs at least one sample")

        def fn(tau: float) -> float:
            idx = min(int(tau * m), m - 1)
            return float(sorted_samples[idx])

        return cls(fn, monotone=True)


def expected_pinball(p: AnalyticDist, q: float, tau: float) -> float:
    """E_{z~p}[pinball_tau(z - q)] via the partial CDF integral.

    Equals integral of F_p from the lower support bound to q, plus
    tau * (mean - q).
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    lo, _ = p.support()
    partial = integrate(p.cdf, lo, q, 1e-10) if q > lo else 0.0
    return partial + tau * (p.mean() - q)


def quantile_divergence(p: AnalyticDist, q: QuantileFn, tol: float) -> float:
    """Nonnegative discrepancy between p's quantile function and q.

    Outer adaptive Simpson over tau in [TAU_EPS, 1 - TAU_EPS]; the inner
    integral runs between the two quantile values at each tau.  A slightly
    negative result within tol is clamped to zero.
    """
    if not tol > 0:
        raise DomainError(f"tol must be > 0, got {tol}")
    inner_tol = min(1e-10, 0.01 * tol)

    def gap(tau: float) -> float:
        qp = p.quantile(tau)
        qq = q(tau)

        def integrand(x: float) -> float:
            return p.cdf(x) - tau

        if qq >= qp:
            return integrate(integrand, qp, qq, inner_tol)
        return -integrate(integrand, qq, qp, inner_tol)

    result = integrate(gap, TAU_EPS, 1.0 - TAU_EPS, tol)
    if result < -tol:
        raise AiqnError(
            f"quantile divergence evaluated to {result} < -tol; "
            "quantile function is probably not monotone")
    return max(result, 0.0)


def wasserstein1_empirical(a, b) -> float:
    """1-Wasserstein distance between equal-size samples: mean absolute
    difference of order statistics.  Inputs are sorted defensively."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size != b.size or a.size == 0:
        raise DomainError(f"equal nonzero sample sizes required, got {a.size} and {b.size}")
    return float(np.mean(np.abs(np.sort(a) - np.sort(b))))


@dataclass
class MomentSummary:
    """Sample mean and covariance of a feature set."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        self.cov = np.asarray(self.cov, dtype=np.float64)
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise DomainError(f"covariance shape {self.cov.shape} does not match mean size {d}")
        if d and np.max(np.abs(self.cov - self.cov.T)) > 1e-9:
            raise DomainError("covariance is not symmetric within 1e-9")


def moment_summary(features: np.ndarray) -> MomentSummary:
    """Mean and (n-1)-normalized covariance of feature rows, symmetrized."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] < 2:
        raise DomainError(f"moment_summary needs a [m >= 2, d] array, got shape {features.shape}")
    m = features.shape[0]
    mean = features.mean(axis=0)
    centered = features - mean
    cov = centered.T @ centered / (m - 1)
    cov = 0.5 * (cov + cov.T)
    return MomentSummary(mean=mean, cov=cov, count=m)


def frechet_distance(m1: MomentSummary, m2: MomentSummary) -> float:
    """||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)).

    The cross root is evaluated through the symmetrized congruence
    S1^(1/2) S2 S1^(1/2), keeping every eigendecomposition on a symmetric
    matrix; its negative eigenvalues (numerical noise) clamp to zero.
    """
    if m1.mean.size != m2.mean.size:
        raise DomainError(f"dimension mismatch: {m1.mean.size} vs {m2.mean.size}")
    diff = m1.mean - m2.mean
    root1 = psd_sqrt(m1.cov)
    middle = root1 @ m2.cov @ root1
    middle = 0.5 * (middle + middle.T)
    value = float(diff @ diff + np.trace(m1.cov) + np.trace(m2.cov) - 2.0 * trace_sqrt(middle))
    return max(value, 0.0)
