"""Declarative job configuration (YAML), validated before any work starts."""
from __future__ import annotations

from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core_stats import HypothesisSpec, ParameterBox
from .design import DEFAULT_B, DEFAULT_C, DEFAULT_TOL, DesignInputs, TestDesign, make_design
from .exceptions import ThreeStageError
from .simulation import ReplicationPlan, TruthPoint


class ConfigError(ThreeStageError, ValueError):
    """Invalid job configuration; the message lists offending field paths."""


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class HypothesisConfig(_Model):
    mu0: float
    mu1: float

    @model_validator(mode="after")
    def _ordered(self):
        if not self.mu0 < self.mu1:
            raise ValueError("need mu0 < mu1")
        return self


class BoxConfig(_Model):
    mu_lo: float
    mu_hi: float
    var_lo: float = Field(gt=0)
    var_hi: float = Field(gt=0)
    eps: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        if not self.mu_lo < self.mu_hi:
            raise ValueError("need mu_lo < mu_hi")
        if not self.var_lo <= self.var_hi:
            raise ValueError("need var_lo <= var_hi")
        if self.eps is None:
            self.eps = 0.5 * self.var_lo
        if not self.eps < self.var_lo:
            raise ValueError("need 0 < eps < var_lo")
        return self


class DesignConfig(_Model):
    a0: float = Field(gt=0)
    a1: float = Field(gt=0)
    c_frac: float = Field(default=DEFAULT_C, gt=0, le=1)
    b_const: float = Field(default=DEFAULT_B, gt=0)
    tol: float = Field(default=DEFAULT_TOL, gt=0)


class Range(_Model):
    start: float
    stop: float
    step: float = Field(gt=0)

    def values(self) -> list[float]:
        k = int(np.floor((self.stop - self.start) / self.step + 1e-9))
        return [self.start + i * self.step for i in range(k + 1)]


class PointConfig(_Model):
    mu: float
    var: float = Field(gt=0)


class GridConfig(_Model):
    mu: Range
    var: Range


class TruthConfig(_Model):
    points: List[PointConfig] = Field(default_factory=list)
    grid: Optional[GridConfig] = None

    def truth_points(self) -> list[TruthPoint]:
        out = [TruthPoint(p.mu, p.var) for p in self.points]
        if self.grid is not None:
            for mu in self.grid.mu.values():
                for var in self.grid.var.values():
                    out.append(TruthPoint(mu, var))
        return out


class PlanConfig(_Model):
    reps: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    workers: int = Field(default=1, ge=1)


class LemmaConfig(_Model):
    k0: List[int] = Field(default_factory=lambda: [20, 40, 80, 160])
    b: List[float] = Field(default_factory=lambda: [DEFAULT_B])
    horizon: Optional[int] = Field(default=None, ge=2)
    truth: Optional[PointConfig] = None

    @model_validator(mode="after")
    def _positive(self):
        if any(k < 2 for k in self.k0):
            raise ValueError("every k0 must be >= 2")
        if any(b <= 0 for b in self.b):
            raise ValueError("every b must be positive")
        return self


class CompareConfig(_Model):
    alpha_var_grid: Optional[List[float]] = None


class RunConfig(_Model):
    data_file: Optional[str] = None
    procedure: Literal["three_stage", "fully_sequential"] = "three_stage"
    trace: bool = True


class OutputConfig(_Model):
    dir: Optional[str] = None
    format: Literal["csv", "json"] = "csv"


class JobConfig(_Model):
    hypothesis: HypothesisConfig
    box: BoxConfig
    design: DesignConfig
    truth: TruthConfig = Field(default_factory=TruthConfig)
    plan: PlanConfig = Field(default_factory=PlanConfig)
    procedures: List[Literal["three_stage", "fully_sequential"]] = Field(
        default_factory=lambda: ["three_stage", "fully_sequential"]
    )
    lemma: LemmaConfig = Field(default_factory=LemmaConfig)
    compare: CompareConfig = Field(default_factory=CompareConfig)
    run: RunConfig = Field(default_factory=RunConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @model_validator(mode="after")
    def _box_brackets_hypotheses(self):
        h, b = self.hypothesis, self.box
        if not b.mu_lo < h.mu0 < h.mu1 < b.mu_hi:
            raise ValueError("need box.mu_lo < hypothesis.mu0 < hypothesis.mu1 < box.mu_hi")
        return self

    # -- domain objects --------------------------------------------------

    def design_inputs(self) -> DesignInputs:
        spec = HypothesisSpec(self.hypothesis.mu0, self.hypothesis.mu1)
        b = self.box
        box = ParameterBox(b.mu_lo, b.mu_hi, b.var_lo, b.var_hi, b.eps)
        d = self.design
        return DesignInputs(d.a0, d.a1, spec, box, d.c_frac, d.b_const)

    def make_design(self) -> TestDesign:
        return make_design(self.design_inputs(), self.design.tol)

    def replication_plan(self) -> ReplicationPlan:
        return ReplicationPlan(self.plan.reps, self.plan.seed, self.plan.workers)

    def effective(self, design: TestDesign) -> "JobConfig":
        """Copy with every defaulted quantity materialised."""
        cfg = self.model_copy(deep=True)
        if cfg.lemma.horizon is None:
            cfg.lemma.horizon = 4 * design.m_cap
        if cfg.compare.alpha_var_grid is None:
            b = cfg.box
            cfg.compare.alpha_var_grid = [b.var_lo, 0.5 * (b.var_lo + b.var_hi), b.var_hi]
        return cfg

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)


def _format_errors(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def parse_config(data: dict) -> JobConfig:
    try:
        return JobConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_format_errors(err)) from None


def load_config(path) -> JobConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"{path}: invalid YAML: {err}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)
