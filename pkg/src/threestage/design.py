"""Design-time constants of the three-stage t-test.

Sample-size surfaces, the crossing mean ``mu2``, the worst-case size
``n_bar`` and its cap ``m``, the first-stage size ``n1`` and the inflation
factor ``rho``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import bisect

from .core_stats import ArrayLike, HypothesisSpec, ParameterBox, kl_info
from .exceptions import DomainError

DEFAULT_TOL = 1e-10
DEFAULT_C = 0.5
DEFAULT_B = 1.0


@dataclass(frozen=True)
class DesignInputs:
    a0: float
    a1: float
    spec: HypothesisSpec
    box: ParameterBox
    c_frac: float = DEFAULT_C
    b_const: float = DEFAULT_B

    def __post_init__(self):
        if not (self.a0 > 0 and self.a1 > 0 and math.isfinite(self.a0) and math.isfinite(self.a1)):
            raise DomainError(f"thresholds must be positive, got a0={self.a0}, a1={self.a1}")
        if not 0 < self.c_frac <= 1:
            raise DomainError(f"need 0 < C <= 1, got C={self.c_frac}")
        if not (self.b_const > 0 and math.isfinite(self.b_const)):
            raise DomainError(f"need B > 0, got B={self.b_const}")
        self.box.check_hypotheses(self.spec)

    def threshold(self, i: int) -> float:
        if i == 0:
            return self.a0
        if i == 1:
            return self.a1
        raise DomainError(f"hypothesis index must be 0 or 1, got {i!r}")


@dataclass(frozen=True)
class TestDesign:
    inputs: DesignInputs
    mu2: float
    n_bar: float
    m_cap: int
    n1: int
    tol: float = field(default=DEFAULT_TOL)

    __test__ = False  # not a pytest class

    @property
    def spec(self) -> HypothesisSpec:
        return self.inputs.spec

    @property
    def box(self) -> ParameterBox:
        return self.inputs.box

    @property
    def a0(self) -> float:
        return self.inputs.a0

    @property
    def a1(self) -> float:
        return self.inputs.a1

    @property
    def b_const(self) -> float:
        return self.inputs.b_const

    @cached_property
    def rho_n1(self) -> float:
        return rho(self.n1, self.inputs.b_const)

    def corner_surfaces(self) -> dict[str, float]:
        """``n(u, v2)`` at the four corners of the parameter box."""
        b = self.box
        out = {}
        for mu_name, u in (("mu_lo", b.mu_lo), ("mu_hi", b.mu_hi)):
            for var_name, v2 in (("var_lo", b.var_lo), ("var_hi", b.var_hi)):
                out[f"{mu_name}/{var_name}"] = float(min_surface(u, v2, self.inputs))
        return out

    def summary(self) -> dict:
        inp = self.inputs
        return {
            "mu0": inp.spec.mu0,
            "mu1": inp.spec.mu1,
            "mu_lo": inp.box.mu_lo,
            "mu_hi": inp.box.mu_hi,
            "var_lo": inp.box.var_lo,
            "var_hi": inp.box.var_hi,
            "eps": inp.box.eps,
            "a0": inp.a0,
            "a1": inp.a1,
            "c_frac": inp.c_frac,
            "b_const": inp.b_const,
            "mu2": self.mu2,
            "n_bar": self.n_bar,
            "m": self.m_cap,
            "n1": self.n1,
            "rho_n1": self.rho_n1,
        }


def surface(i: int, u: ArrayLike, v2: ArrayLike, inputs: DesignInputs):
    """Sample size ``A_i / I_i(u, v2)`` where the GLR boundary ``i`` is crossed.

    Infinite where ``u == mu_i``.
    """
    info = kl_info(i, u, v2, inputs.spec)
    a = inputs.threshold(i)
    with np.errstate(divide="ignore"):
        out = np.divide(a, info, out=np.full(np.shape(info), np.inf), where=np.asarray(info) > 0)
    return float(out) if np.ndim(out) == 0 else out


def min_surface(u: ArrayLike, v2: ArrayLike, inputs: DesignInputs):
    return np.minimum(surface(0, u, v2, inputs), surface(1, u, v2, inputs))


def solve_mu2(inputs: DesignInputs, tol: float = DEFAULT_TOL) -> float:
    """Mean in ``(mu0, mu1)`` where ``I0 / I1`` at ``var_hi`` equals ``A0 / A1``.

    ``log I0 - log I1`` is strictly increasing on the open interval, so
    bisection on a bracket pulled in by a relative ``1e-12`` is always valid.
    """
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol}")
    spec, v2 = inputs.spec, inputs.box.var_hi
    target = math.log(inputs.a0 / inputs.a1)

    def g(mu):
        return math.log(kl_info(0, mu, v2, spec)) - math.log(kl_info(1, mu, v2, spec)) - target

    delta = 1e-12 * (spec.mu1 - spec.mu0)
    lo, hi = spec.mu0 + delta, spec.mu1 - delta
    g_lo, g_hi = g(lo), g(hi)
    # ratios beyond the pulled-in bracket: the root sits within delta of an end
    if g_lo >= 0:
        return lo
    if g_hi <= 0:
        return hi
    return bisect(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)


def rho(n: int, b_const: float) -> float:
    """Inflation factor ``1 + B sqrt(log(n) / n)``."""
    if n < 1:
        raise DomainError(f"rho needs n >= 1, got {n}")
    return 1.0 + b_const * math.sqrt(math.log(n) / n)


def make_design(inputs: DesignInputs, tol: float = DEFAULT_TOL) -> TestDesign:
    box = inputs.box
    mu2 = solve_mu2(inputs, tol)
    n_bar = float(min_surface(mu2, box.var_hi, inputs))
    # GLR needs two observations, so the cap never drops below 2
    m_cap = max(2, math.ceil(n_bar))
    corner = min(
        float(min_surface(box.mu_hi, box.var_lo, inputs)),
        float(min_surface(box.mu_lo, box.var_lo, inputs)),
    )
    n1 = min(max(2, math.floor(inputs.c_frac * corner)), m_cap)
    return TestDesign(inputs=inputs, mu2=mu2, n_bar=n_bar, m_cap=m_cap, n1=n1, tol=tol)
