"""Monte Carlo operating characteristics and theoretical comparison targets.

Replicate ``r`` always draws from the Philox stream keyed by ``(seed, r)``,
and results are assembled in replicate order, so every report is a pure
function of ``(seed, design, truth, procedure)`` whatever the worker count.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core_stats import HypothesisSpec, kl_info, prefix_moments, SampleAccumulator
from .design import TestDesign, min_surface
from .exceptions import DegenerateDataError, DomainError
from .procedures import PROCEDURES, Decision, Stage
from .sources import NormalStream

BLOCK_SIZE = 1000


@dataclass(frozen=True)
class TruthPoint:
    mu: float
    var: float

    def __post_init__(self):
        if not (self.var > 0 and math.isfinite(self.var) and math.isfinite(self.mu)):
            raise DomainError(f"truth needs finite mu and var > 0, got ({self.mu}, {self.var})")


@dataclass(frozen=True)
class ReplicationPlan:
    reps: int
    seed: int
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise DomainError(f"reps must be >= 1, got {self.reps}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        if self.workers < 1:
            raise DomainError(f"workers must be >= 1, got {self.workers}")


def normal_stream(seed: int, rep_index: int, truth: TruthPoint) -> NormalStream:
    return NormalStream(seed, rep_index, truth.mu, truth.var)


@dataclass
class Replicates:
    """Per-replicate outcome columns, indexed by replicate number."""

    total_n: np.ndarray
    n2: np.ndarray  # -1 where the procedure stopped before choosing N2
    reject_h0: np.ndarray
    stage: np.ndarray  # 1, 2, 3; 0 for degenerate
    fallback: np.ndarray
    degenerate: np.ndarray

    @classmethod
    def concat(cls, parts: Sequence["Replicates"]) -> "Replicates":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("total_n", "n2", "reject_h0", "stage", "fallback", "degenerate")))


def _stage_code(outcome, design: TestDesign) -> int:
    if outcome.stage is Stage.PER_OBSERVATION:
        # position of the stopping time: at N1, strictly between, at m
        if outcome.total_n == design.n1:
            return 1
        return 3 if outcome.total_n == design.m_cap else 2
    return {Stage.STAGE1: 1, Stage.STAGE2: 2, Stage.STAGE3: 3}[outcome.stage]


def _run_block(design: TestDesign, truth: TruthPoint, seed: int, proc: str, start: int, stop: int) -> Replicates:
    run = PROCEDURES[proc]
    k = stop - start
    total_n = np.zeros(k, dtype=np.int64)
    n2 = np.full(k, -1, dtype=np.int64)
    reject_h0 = np.zeros(k, dtype=bool)
    stage = np.zeros(k, dtype=np.int8)
    fallback = np.zeros(k, dtype=bool)
    degenerate = np.zeros(k, dtype=bool)
    for j, r in enumerate(range(start, stop)):
        try:
            out = run(design, normal_stream(seed, r, truth))
        except DegenerateDataError:
            degenerate[j] = True
            total_n[j] = design.m_cap
            continue
        total_n[j] = out.total_n
        if out.n2 is not None:
            n2[j] = out.n2
        reject_h0[j] = out.decision is Decision.REJECT_H0
        stage[j] = _stage_code(out, design)
        fallback[j] = out.fallback
    return Replicates(total_n, n2, reject_h0, stage, fallback, degenerate)


def _blocks(reps: int):
    return [(s, min(s + BLOCK_SIZE, reps)) for s in range(0, reps, BLOCK_SIZE)]


def _map_blocks(fn, args_list, workers: int):
    if workers == 1 or len(args_list) == 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futures]


def simulate_replicates(design: TestDesign, truth: TruthPoint, plan: ReplicationPlan,
                        proc: str = "three_stage") -> Replicates:
    if proc not in PROCEDURES:
        raise DomainError(f"unknown procedure {proc!r}; choose from {sorted(PROCEDURES)}")
    args = [(design, truth, plan.seed, proc, a, b) for a, b in _blocks(plan.reps)]
    return Replicates.concat(_map_blocks(_run_block, args, plan.workers))


@dataclass
class SimulationReport:
    procedure: str
    mu: float
    var: float
    in_box: bool
    design: dict
    reps: int
    seed: int
    reject_h0_rate: float
    reject_h1_rate: float
    alpha_hat: Optional[float]
    se_alpha_hat: Optional[float]
    mean_n: float
    se_mean_n: float
    stage1: int
    stage2: int
    stage3: int
    fallback_rate: float
    degenerate_count: int
    oracle_n: float
    replicates: Optional[Replicates] = field(default=None, repr=False, compare=False)

    @property
    def truth(self) -> TruthPoint:
        return TruthPoint(self.mu, self.var)

    @property
    def stage_histogram(self) -> dict[int, int]:
        return {1: self.stage1, 2: self.stage2, 3: self.stage3}

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("replicates")
        return d


def oracle_sample_size(design: TestDesign, truth: TruthPoint) -> float:
    """``n(mu, var)`` for the true parameters under the design's thresholds."""
    return float(min_surface(truth.mu, truth.var, design.inputs))


def hoeffding_lower_bound(alpha0: float, alpha1: float, truth: TruthPoint, spec: HypothesisSpec) -> float:
    """Leading-order Hoeffding bound ``log(1/(alpha0+alpha1)) / max_j I_j(mu, var)``.

    The ``O(sqrt(log))`` correction is not included.
    """
    total = alpha0 + alpha1
    if not (0 <= alpha0 and 0 <= alpha1 and 0 < total < 1):
        raise DomainError(f"need 0 < alpha0 + alpha1 < 1, got {alpha0} + {alpha1}")
    info = max(kl_info(0, truth.mu, truth.var, spec), kl_info(1, truth.mu, truth.var, spec))
    return -math.log(total) / info


def summarize(design: TestDesign, truth: TruthPoint, plan: ReplicationPlan, proc: str,
              reps: Replicates, keep_replicates: bool = False) -> SimulationReport:
    ok = ~reps.degenerate
    k = int(ok.sum())
    if k == 0:
        raise DegenerateDataError(f"all {plan.reps} replicates were degenerate")
    p0 = float(np.mean(reps.reject_h0[ok]))
    p1 = float(np.mean(~reps.reject_h0[ok]))
    n = reps.total_n[ok].astype(float)
    mean_n = float(np.mean(n))
    se_n = float(np.std(n, ddof=1) / math.sqrt(k)) if k > 1 else 0.0
    spec = design.spec
    alpha = None
    if truth.mu == spec.mu0:
        alpha = p0
    elif truth.mu == spec.mu1:
        alpha = p1
    se_alpha = None if alpha is None else math.sqrt(p0 * p1 / k)
    stages = reps.stage[ok]
    return SimulationReport(
        procedure=proc,
        mu=truth.mu,
        var=truth.var,
        in_box=bool(design.box.contains(truth.mu, truth.var)),
        design=design.summary(),
        reps=plan.reps,
        seed=plan.seed,
        reject_h0_rate=p0,
        reject_h1_rate=p1,
        alpha_hat=alpha,
        se_alpha_hat=se_alpha,
        mean_n=mean_n,
        se_mean_n=se_n,
        stage1=int(np.sum(stages == 1)),
        stage2=int(np.sum(stages == 2)),
        stage3=int(np.sum(stages == 3)),
        fallback_rate=float(np.mean(reps.fallback[ok])),
        degenerate_count=int(plan.reps - k),
        oracle_n=oracle_sample_size(design, truth),
        replicates=reps if keep_replicates else None,
    )


def monte_carlo(design: TestDesign, truth: TruthPoint, plan: ReplicationPlan,
                proc: str = "three_stage", keep_replicates: bool = False) -> SimulationReport:
    reps = simulate_replicates(design, truth, plan, proc)
    return summarize(design, truth, plan, proc, reps, keep_replicates)


def _lemma_block(design: TestDesign, truth: TruthPoint, horizon: int, seed: int,
                 b_values: tuple, start: int, stop: int) -> np.ndarray:
    """Last violating ``k`` in ``[2, horizon]`` per replicate and per B (1 if none)."""
    inputs, box = design.inputs, design.box
    n_true = oracle_sample_size(design, truth)
    k = np.arange(2, horizon + 1)
    log_term = np.sqrt(np.log(k) / k)
    rhos = [1.0 + b * log_term for b in b_values]
    out = np.ones((stop - start, len(b_values)), dtype=np.int64)
    for j, r in enumerate(range(start, stop)):
        x = normal_stream(seed, r, truth).read(horizon)
        _, mean, m2 = prefix_moments(SampleAccumulator(), x)
        mean, var = mean[1:], m2[1:] / k
        inside = box.contains_inflated(mean, var) & (var > 0)
        ratio = np.full(k.size, np.nan)
        ratio[inside] = min_surface(mean[inside], var[inside], inputs) / n_true
        for col, rho_k in enumerate(rhos):
            ok = inside & (ratio > 1.0 / rho_k) & (ratio < rho_k)
            bad = np.flatnonzero(~ok)
            if bad.size:
                out[j, col] = k[bad[-1]]
    return out


def lemma21_last_violations(design: TestDesign, truth: TruthPoint, horizon: int,
                            plan: ReplicationPlan, b_values: Sequence[float] | None = None) -> np.ndarray:
    """``(reps, len(b_values))`` array of the last ``k`` at which the event fails.

    The event holds for every ``k`` in ``[k0, horizon]`` iff the entry is below ``k0``.
    """
    if horizon < 2:
        raise DomainError(f"horizon must be >= 2, got {horizon}")
    b_values = tuple(b_values) if b_values is not None else (design.b_const,)
    args = [(design, truth, horizon, plan.seed, b_values, a, b) for a, b in _blocks(plan.reps)]
    return np.concatenate(_map_blocks(_lemma_block, args, plan.workers))


def lemma21_event_rate(design: TestDesign, truth: TruthPoint, k0: int, horizon: int | None,
                       plan: ReplicationPlan) -> float:
    """Fraction of replicates where, for every ``k`` in ``[k0, horizon]``, the
    estimates lie in the inflated box and ``n(estimates) / n(truth)`` lies in
    ``(1/rho_k, rho_k)``. ``horizon`` defaults to ``4 m``.
    """
    horizon = 4 * design.m_cap if horizon is None else horizon
    if not 2 <= k0 <= horizon:
        raise DomainError(f"need 2 <= k0 <= horizon, got k0={k0}, horizon={horizon}")
    last = lemma21_last_violations(design, truth, horizon, plan)[:, 0]
    return float(np.mean(last < k0))


# -- serialisation ---------------------------------------------------------

CSV_COLUMNS = (
    "procedure", "mu", "var", "in_box",
    "a0", "a1", "c_frac", "b_const", "mu2", "n_bar", "m", "n1",
    "reps", "seed",
    "reject_h0_rate", "reject_h1_rate", "alpha_hat", "se_alpha_hat",
    "mean_n", "se_mean_n", "oracle_n",
    "stage1", "stage2", "stage3", "fallback_rate", "degenerate_count",
)


def fmt(value) -> str:
    """CSV cell text: floats with 17 significant digits, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def report_row(report: SimulationReport) -> dict:
    row = report.to_dict()
    d = row.pop("design")
    for key in ("a0", "a1", "c_frac", "b_const", "mu2", "n_bar", "m", "n1"):
        row[key] = d[key]
    return row


def reports_to_csv(reports: Sequence[SimulationReport]) -> str:
    return write_csv([report_row(r) for r in reports], CSV_COLUMNS)


def reports_to_json(reports: Sequence[SimulationReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


# -- composite jobs ----------------------------------------------------------

def estimate_alphas(design: TestDesign, plan: ReplicationPlan, proc: str,
                    var_grid: Sequence[float]) -> tuple[float, float, float, float]:
    """``(alpha0, alpha1, se0, se1)``: worst rejection rate over ``var_grid``
    at each hypothesis boundary mean."""
    spec = design.spec
    best = []
    for mu in (spec.mu0, spec.mu1):
        reports = [monte_carlo(design, TruthPoint(mu, v), plan, proc) for v in var_grid]
        top = max(reports, key=lambda r: r.alpha_hat)
        best.append((top.alpha_hat, top.se_alpha_hat))
    return best[0][0], best[1][0], best[0][1], best[1][1]


COMPARE_COLUMNS = (
    "mu", "var", "in_box", "oracle_n",
    "mean_n_three_stage", "se_three_stage",
    "mean_n_fully_sequential", "se_fully_sequential",
    "ratio_three_stage_to_sequential",
    "alpha0_hat", "alpha1_hat", "hoeffding_leading_order",
)


def compare_rows(design: TestDesign, truths: Sequence[TruthPoint], plan: ReplicationPlan,
                 alpha_var_grid: Sequence[float]) -> list[dict]:
    """Expected sample sizes of both procedures next to ``n(mu, var)`` and the
    leading-order Hoeffding bound built from the sequential test's error rates."""
    a0, a1, _, _ = estimate_alphas(design, plan, "fully_sequential", alpha_var_grid)
    rows = []
    for t in truths:
        three = monte_carlo(design, t, plan, "three_stage")
        seq = monte_carlo(design, t, plan, "fully_sequential")
        bound = hoeffding_lower_bound(a0, a1, t, design.spec) if 0 < a0 + a1 < 1 else None
        rows.append({
            "mu": t.mu,
            "var": t.var,
            "in_box": three.in_box,
            "oracle_n": oracle_sample_size(design, t),
            "mean_n_three_stage": three.mean_n,
            "se_three_stage": three.se_mean_n,
            "mean_n_fully_sequential": seq.mean_n,
            "se_fully_sequential": seq.se_mean_n,
            "ratio_three_stage_to_sequential": three.mean_n / seq.mean_n,
            "alpha0_hat": a0,
            "alpha1_hat": a1,
            "hoeffding_leading_order": bound,
        })
    return rows


LEMMA_COLUMNS = ("mu", "var", "k0", "b_const", "horizon", "reps", "rate", "se_rate", "scaled_miss")


def lemma_rows(design: TestDesign, truth: TruthPoint, k0s: Sequence[int], b_values: Sequence[float],
               horizon: int, plan: ReplicationPlan) -> list[dict]:
    """Event rates over a ``(B, k0)`` sweep; ``scaled_miss`` is ``(1 - rate) * k0``."""
    for k0 in k0s:
        if not 2 <= k0 <= horizon:
            raise DomainError(f"need 2 <= k0 <= horizon, got k0={k0}, horizon={horizon}")
    last = lemma21_last_violations(design, truth, horizon, plan, b_values)
    rows = []
    for col, b in enumerate(b_values):
        for k0 in k0s:
            rate = float(np.mean(last[:, col] < k0))
            rows.append({
                "mu": truth.mu,
                "var": truth.var,
                "k0": k0,
                "b_const": float(b),
                "horizon": horizon,
                "reps": plan.reps,
                "rate": rate,
                "se_rate": math.sqrt(rate * (1 - rate) / plan.reps),
                "scaled_miss": (1 - rate) * k0,
            })
    return rows
