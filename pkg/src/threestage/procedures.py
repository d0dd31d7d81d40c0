"""Three-stage, fully-sequential and fixed-sample GLR t-tests.

All three share the same pair of rejection rules and the same terminal
rule at the sample-size cap: reject H0 iff ``Lambda_0 > Lambda_1``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core_stats import SampleAccumulator, glr_from_moments, prefix_moments
from .design import TestDesign
from .exceptions import (
    DegenerateDataError,
    DegenerateSampleError,
    DomainError,
    InsufficientDataError,
)
from .sources import ObservationSource


class Decision(enum.Enum):
    REJECT_H0 = "RejectH0"
    REJECT_H1 = "RejectH1"

    def __str__(self):
        return self.value


class Stage(enum.Enum):
    STAGE1 = "Stage1"
    STAGE2 = "Stage2"
    STAGE3 = "Stage3"
    PER_OBSERVATION = "PerObservation"

    def __str__(self):
        return self.value


class Snapshot(NamedTuple):
    n: int
    lam0: float
    lam1: float
    mean: float
    var: float


@dataclass(frozen=True)
class TestOutcome:
    decision: Decision
    total_n: int
    stage: Stage
    fallback: bool
    n1: int
    n2: Optional[int]
    m: int
    trace: Optional[tuple] = None

    __test__ = False

    def as_dict(self) -> dict:
        out = {
            "decision": str(self.decision),
            "total_n": self.total_n,
            "stage": str(self.stage),
            "fallback": self.fallback,
            "n1": self.n1,
            "n2": self.n2,
            "m": self.m,
        }
        if self.trace is not None:
            out["trace"] = [s._asdict() for s in self.trace]
        return out


def rule_masks(n, mean, var, design: TestDesign):
    """Elementwise truth of the reject-H0 and reject-H1 rules.

    Windows on the mean and variance are open; GLR thresholds are weak.
    Points with non-positive variance satisfy neither rule.
    """
    spec, box = design.spec, design.box
    n, mean, var = np.asarray(n), np.asarray(mean, dtype=float), np.asarray(var, dtype=float)
    ok = var > 0
    safe_var = np.where(ok, var, 1.0)
    lam0 = glr_from_moments(0, n, mean, safe_var, spec)
    lam1 = glr_from_moments(1, n, mean, safe_var, spec)
    var_window = ok & (box.var_lo - box.eps < var) & (var < box.var_hi + box.eps)
    h0 = var_window & (spec.mu0 < mean) & (mean < box.mu_hi + box.eps) & (lam0 >= design.a0)
    h1 = var_window & (box.mu_lo - box.eps < mean) & (mean < spec.mu1) & (lam1 >= design.a1)
    return h0, h1, lam0, lam1


def _rules_scalar(acc: SampleAccumulator, design: TestDesign):
    """Scalar twin of :func:`rule_masks` for a non-degenerate accumulator."""
    spec, box = design.spec, design.box
    n, mean, var = acc.n, acc.mean, acc.var
    d0, d1 = mean - spec.mu0, mean - spec.mu1
    lam0 = 0.5 * n * math.log1p(d0 * d0 / var)
    lam1 = 0.5 * n * math.log1p(d1 * d1 / var)
    var_window = box.var_lo - box.eps < var < box.var_hi + box.eps
    h0 = var_window and spec.mu0 < mean < box.mu_hi + box.eps and lam0 >= design.a0
    h1 = var_window and box.mu_lo - box.eps < mean < spec.mu1 and lam1 >= design.a1
    return h0, h1, lam0, lam1


def _require_nondegenerate(acc: SampleAccumulator) -> None:
    if acc.is_degenerate:
        raise DegenerateSampleError(
            f"rules need n >= 2 and positive variance (n={acc.n}, m2={acc.m2})"
        )


def check_reject_h0(acc: SampleAccumulator, design: TestDesign) -> bool:
    _require_nondegenerate(acc)
    return _rules_scalar(acc, design)[0]


def check_reject_h1(acc: SampleAccumulator, design: TestDesign) -> bool:
    _require_nondegenerate(acc)
    return _rules_scalar(acc, design)[1]


def _surface_scalar(mean: float, var: float, design: TestDesign) -> float:
    spec = design.spec
    out = math.inf
    for mu_i, a_i in ((spec.mu0, design.a0), (spec.mu1, design.a1)):
        d = mean - mu_i
        info = 0.5 * math.log1p(d * d / var)
        if info > 0:
            out = min(out, a_i / info)
    return out


def second_stage_size(acc_at_n1: SampleAccumulator, design: TestDesign) -> int:
    """``min(m, max(N1, ceil(rho(N1)^2 * n(mean, var))))`` from first-stage data."""
    _require_nondegenerate(acc_at_n1)
    m, n1 = design.m_cap, design.n1
    target = design.rho_n1 ** 2 * _surface_scalar(acc_at_n1.mean, acc_at_n1.var, design)
    if not target < m:
        return m
    return min(m, max(n1, math.ceil(target)))


def _decide(lam0: float, lam1: float) -> Decision:
    return Decision.REJECT_H0 if lam0 > lam1 else Decision.REJECT_H1


def _snapshot(acc: SampleAccumulator, design: TestDesign) -> Snapshot:
    if acc.is_degenerate:
        lam0 = lam1 = math.nan
    else:
        _, _, lam0, lam1 = _rules_scalar(acc, design)
    return Snapshot(acc.n, float(lam0), float(lam1), acc.mean, acc.var)


def _checkpoint(acc, design, trace) -> Optional[Decision]:
    """Apply both rules at one look; ``None`` means keep sampling."""
    if trace is not None:
        trace.append(_snapshot(acc, design))
    if acc.is_degenerate:
        return None
    h0, h1, lam0, lam1 = _rules_scalar(acc, design)
    if h0 and h1:
        # both windows can hold inside (mu0, mu1); break it like the terminal rule
        return _decide(lam0, lam1)
    if h0:
        return Decision.REJECT_H0
    if h1:
        return Decision.REJECT_H1
    return None


def _terminal(acc, design) -> Decision:
    if acc.is_degenerate:
        raise DegenerateDataError(
            f"zero sample variance at the cap n={acc.n}; terminal comparison undefined"
        )
    _, _, lam0, lam1 = _rules_scalar(acc, design)
    return _decide(lam0, lam1)


def _take(source: ObservationSource, acc: SampleAccumulator, k: int) -> SampleAccumulator:
    x = source.read(k)
    if len(x) < k:
        raise InsufficientDataError(
            f"source exhausted at n={acc.n + len(x)}; procedure needed n={acc.n + k}"
        )
    return acc.extend(x)


def _trace(trace):
    return tuple(trace) if trace is not None else None


def run_three_stage(design: TestDesign, source: ObservationSource, trace: bool = False) -> TestOutcome:
    snaps = [] if trace else None
    n1, m = design.n1, design.m_cap

    def done(acc, decision, stage, n2, fallback=False):
        return TestOutcome(decision, acc.n, stage, fallback, n1, n2, m, _trace(snaps))

    acc = _take(source, SampleAccumulator(), n1)
    verdict = _checkpoint(acc, design, snaps)
    if verdict is not None:
        return done(acc, verdict, Stage.STAGE1, None)

    # degenerate first stage gives no size estimate; sample to the cap
    n2 = m if acc.is_degenerate else second_stage_size(acc, design)
    if n2 > acc.n:
        acc = _take(source, acc, n2 - acc.n)
        verdict = _checkpoint(acc, design, snaps)
        if verdict is not None:
            return done(acc, verdict, Stage.STAGE2, n2)

    if m > acc.n:
        acc = _take(source, acc, m - acc.n)
        verdict = _checkpoint(acc, design, snaps)
        if verdict is not None:
            return done(acc, verdict, Stage.STAGE3, n2)

    return done(acc, _terminal(acc, design), Stage.STAGE3, n2, fallback=True)


_FIRST_CHUNK = 64


def run_fully_sequential(design: TestDesign, source: ObservationSource, trace: bool = False) -> TestOutcome:
    """Apply both rules after every observation from ``N1`` through ``m``."""
    snaps = [] if trace else None
    n1, m = design.n1, design.m_cap

    def done(acc, decision, fallback=False):
        return TestOutcome(decision, acc.n, Stage.PER_OBSERVATION, fallback, n1, None, m, _trace(snaps))

    acc = _take(source, SampleAccumulator(), n1)
    verdict = _checkpoint(acc, design, snaps)
    if verdict is not None:
        return done(acc, verdict)

    chunk = _FIRST_CHUNK
    while acc.n < m:
        want = min(chunk, m - acc.n)
        x = source.read(want)
        if len(x) == 0:
            raise InsufficientDataError(f"source exhausted at n={acc.n}; procedure needed n={m}")
        n, mean, m2 = prefix_moments(acc, x)
        var = m2 / n
        h0, h1, lam0, lam1 = rule_masks(n, mean, var, design)
        hit = np.flatnonzero(h0 | h1)
        stop = hit[0] if hit.size else len(x) - 1
        if snaps is not None:
            for j in range(stop + 1):
                ok = var[j] > 0
                snaps.append(Snapshot(
                    int(n[j]),
                    float(lam0[j]) if ok else math.nan,
                    float(lam1[j]) if ok else math.nan,
                    float(mean[j]),
                    float(var[j]),
                ))
        acc = SampleAccumulator(int(n[stop]), float(mean[stop]), float(m2[stop]))
        if hit.size:
            j = hit[0]
            if h0[j] and h1[j]:
                decision = _decide(lam0[j], lam1[j])
            else:
                decision = Decision.REJECT_H0 if h0[j] else Decision.REJECT_H1
            return done(acc, decision)
        if len(x) < want:
            raise InsufficientDataError(f"source exhausted at n={acc.n}; procedure needed n={m}")
        chunk *= 2

    return done(acc, _terminal(acc, design), fallback=True)


def run_fixed_sample(n_fix: int, design: TestDesign, source: ObservationSource, trace: bool = False) -> TestOutcome:
    """Single look at ``n_fix`` with the same rules and terminal comparison."""
    if n_fix < 2:
        raise DomainError(f"fixed sample size must be >= 2, got {n_fix}")
    snaps = [] if trace else None
    acc = _take(source, SampleAccumulator(), n_fix)
    verdict = _checkpoint(acc, design, snaps)
    fallback = verdict is None
    if fallback:
        verdict = _terminal(acc, design)
    return TestOutcome(verdict, acc.n, Stage.STAGE1, fallback, n_fix, None, n_fix, _trace(snaps))


PROCEDURES = {
    "three_stage": run_three_stage,
    "fully_sequential": run_fully_sequential,
}
