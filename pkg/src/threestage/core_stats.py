"""Sufficient statistics, Kullback-Leibler information and the GLR statistic
for i.i.d. normal data with unknown mean and variance.

All logarithms are natural, so GLR values and thresholds are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import DegenerateSampleError, DomainError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class HypothesisSpec:
    """Separated one-sided hypotheses ``H0: mu <= mu0`` vs ``H1: mu >= mu1``."""

    mu0: float
    mu1: float

    def __post_init__(self):
        if not (math.isfinite(self.mu0) and math.isfinite(self.mu1)):
            raise DomainError("mu0 and mu1 must be finite")
        if not self.mu0 < self.mu1:
            raise DomainError(f"need mu0 < mu1, got mu0={self.mu0}, mu1={self.mu1}")

    def mu(self, i: int) -> float:
        if i == 0:
            return self.mu0
        if i == 1:
            return self.mu1
        raise DomainError(f"hypothesis index must be 0 or 1, got {i!r}")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.mu0 + self.mu1)


@dataclass(frozen=True)
class ParameterBox:
    """A-priori bounds on the mean and variance, plus the margin ``eps``.

    ``eps`` is in variance units and also inflates the mean range; it
    defaults to ``var_lo / 2``.
    """

    mu_lo: float
    mu_hi: float
    var_lo: float
    var_hi: float
    eps: float | None = None

    def __post_init__(self):
        if self.eps is None:
            object.__setattr__(self, "eps", 0.5 * self.var_lo)
        vals = (self.mu_lo, self.mu_hi, self.var_lo, self.var_hi, self.eps)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("box bounds must be finite")
        if not self.mu_lo < self.mu_hi:
            raise DomainError(f"need mu_lo < mu_hi, got {self.mu_lo}, {self.mu_hi}")
        if not 0 < self.var_lo <= self.var_hi:
            raise DomainError(
                f"need 0 < var_lo <= var_hi, got {self.var_lo}, {self.var_hi}"
            )
        if not 0 < self.eps < self.var_lo:
            raise DomainError(f"need 0 < eps < var_lo, got eps={self.eps}")

    def check_hypotheses(self, spec: HypothesisSpec) -> None:
        if not self.mu_lo < spec.mu0 < spec.mu1 < self.mu_hi:
            raise DomainError(
                "need mu_lo < mu0 < mu1 < mu_hi, got "
                f"{self.mu_lo} < {spec.mu0} < {spec.mu1} < {self.mu_hi}"
            )

    def contains(self, mu: ArrayLike, var: ArrayLike):
        """Membership in the closed box J."""
        return (
            (self.mu_lo <= mu) & (mu <= self.mu_hi)
            & (self.var_lo <= var) & (var <= self.var_hi)
        )

    def contains_inflated(self, mu: ArrayLike, var: ArrayLike):
        """Membership in the open box J inflated by ``eps`` on every side."""
        e = self.eps
        return (
            (self.mu_lo - e < mu) & (mu < self.mu_hi + e)
            & (self.var_lo - e < var) & (var < self.var_hi + e)
        )


@dataclass(frozen=True)
class SampleAccumulator:
    """Count, mean and centred sum of squares ``m2`` of the data seen so far.

    Instances are immutable; :meth:`push` and :meth:`extend` return new ones.
    """

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    @property
    def var(self) -> float:
        """MLE variance ``m2 / n`` (divisor n)."""
        if self.n == 0:
            return math.nan
        return self.m2 / self.n

    @property
    def is_degenerate(self) -> bool:
        return self.n < 2 or self.m2 <= 0.0

    def push(self, x: float) -> "SampleAccumulator":
        n = self.n + 1
        delta = x - self.mean
        mean = self.mean + delta / n
        m2 = self.m2 + delta * (x - mean)
        return SampleAccumulator(n, mean, m2)

    def extend(self, values) -> "SampleAccumulator":
        """Absorb a batch with a two-pass chunk summary and a pairwise merge."""
        x = np.asarray(values, dtype=float).ravel()
        k = x.size
        if k == 0:
            return self
        chunk_mean = float(x.mean())
        chunk_m2 = float(np.sum((x - chunk_mean) ** 2))
        if self.n == 0:
            return SampleAccumulator(k, chunk_mean, chunk_m2)
        n = self.n + k
        delta = chunk_mean - self.mean
        mean = self.mean + delta * (k / n)
        m2 = self.m2 + chunk_m2 + delta * delta * (self.n * k / n)
        return SampleAccumulator(n, mean, m2)

    @classmethod
    def from_values(cls, values) -> "SampleAccumulator":
        return cls().extend(values)


def push(acc: SampleAccumulator, x: float) -> SampleAccumulator:
    return acc.push(x)


def prefix_moments(acc: SampleAccumulator, values):
    """Running ``(n, mean, m2)`` after each element of ``values`` is appended.

    Sums are taken about a shift close to the running mean, which keeps the
    ``sum of squares minus square of sum`` step well conditioned.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        empty = np.empty(0)
        return empty.astype(np.int64), empty, empty
    shift = acc.mean if acc.n > 0 else x[0]
    d = x - shift
    offset = acc.mean - shift
    s1 = acc.n * offset + np.cumsum(d)
    s2 = acc.m2 + acc.n * offset * offset + np.cumsum(d * d)
    n = acc.n + np.arange(1, x.size + 1, dtype=np.int64)
    mean = shift + s1 / n
    m2 = np.maximum(s2 - s1 * s1 / n, 0.0)
    return n, mean, m2


def kl_info(i: int, u: ArrayLike, v2: ArrayLike, spec: HypothesisSpec):
    """Kullback-Leibler information ``0.5 * log(1 + (u - mu_i)^2 / v2)``.

    Accepts scalars or numpy arrays for ``u`` and ``v2``.
    """
    if np.any(np.asarray(v2) <= 0) or np.any(np.isnan(v2)):
        raise DomainError("variance argument v2 must be positive")
    d = u - spec.mu(i)
    out = 0.5 * np.log1p(d * d / v2)
    return float(out) if np.ndim(out) == 0 else out


def glr_stat(i: int, acc: SampleAccumulator, spec: HypothesisSpec) -> float:
    """Log GLR ``(n/2) log(1 + ((mean - mu_i) / sigma_hat)^2)`` for hypothesis ``i``."""
    if acc.n < 2:
        raise DegenerateSampleError(f"GLR needs n >= 2, got n={acc.n}")
    if not acc.m2 > 0.0:
        raise DegenerateSampleError("GLR undefined for zero sample variance")
    t = (acc.mean - spec.mu(i)) / math.sqrt(acc.var)
    return 0.5 * acc.n * math.log1p(t * t)


def glr_from_moments(i: int, n, mean, var, spec: HypothesisSpec):
    """Vectorised ``n * I_i(mean, var)``; no degeneracy checks, callers mask."""
    d = mean - spec.mu(i)
    return 0.5 * n * np.log1p(d * d / var)
