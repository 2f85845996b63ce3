"""Experiment configuration: a JSON document validated by pydantic, with flag overrides."""

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from ..config import DEFAULT_WINDOW_L, DEFAULT_WORKERS, alpha_critical
from ..disorder.laws import TailLaw
from ..disorder.scaling import ScalingPlan
from ..lab.bumps import BumpProduct
from ..lattice.functionals import CylinderFactor, GaussianFactor, IndicatorFactor, PathFunctional
from ..utils.errors import PolymerLabError, ValidationError

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    "simulate-discrete",
    "simulate-continuum",
    "converge",
    "truncation-curve",
    "moments",
    "verify-appendix",
    "replica-moment",
    "sample-paths",
)

Experiment = Literal[
    "simulate-discrete",
    "simulate-continuum",
    "converge",
    "truncation-curve",
    "moments",
    "verify-appendix",
    "replica-moment",
    "sample-paths",
]


class LawConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    family: Literal["pareto", "centered_pareto", "log_pareto"] = "centered_pareto"
    alpha: float = 1.5
    uncentered: bool = False

    def build(self) -> TailLaw:
        return TailLaw(family=self.family, alpha=self.alpha, uncentered=self.uncentered)


class GeometryConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    N: Optional[int] = None
    N_grid: List[int] = Field(default_factory=list)
    d: int = 1
    L: float = DEFAULT_WINDOW_L
    t: float = 0.5

    @field_validator("N_grid")
    @classmethod
    def _positive_grid(cls, v: List[int]) -> List[int]:
        if any(n < 1 for n in v):
            raise ValueError("N values must be >= 1")
        return v

    @field_validator("d")
    @classmethod
    def _dimension(cls, v: int) -> int:
        if v < 1:
            raise ValueError("d must be >= 1")
        return v

    @field_validator("L")
    @classmethod
    def _window(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("L must be positive")
        return v

    def n_values(self) -> List[int]:
        if self.N_grid:
            return list(self.N_grid)
        return [self.N] if self.N is not None else []


class DisorderConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    beta_hat: float = 1.0
    a: float = 0.0
    b: float = math.inf
    a_grid: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "DisorderConfig":
        if self.a < 0:
            raise ValueError("a must be >= 0")
        if not self.b > self.a:
            raise ValueError("b must exceed a")
        if any(x < 0 for x in self.a_grid):
            raise ValueError("a_grid entries must be >= 0")
        return self


class FactorConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    time: float
    kind: Literal["gaussian", "indicator"] = "gaussian"
    center: float = 0.0
    width: float = 1.0

    def build(self) -> CylinderFactor:
        g = GaussianFactor(self.center, self.width) if self.kind == "gaussian" else IndicatorFactor(self.center, self.width)
        return CylinderFactor(self.time, g, 1.0)


class FunctionalConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant_one", "cylinder", "support_cutoff"] = "constant_one"
    A: float = 3.0
    factors: List[FactorConfig] = Field(default_factory=list)

    def build(self) -> PathFunctional:
        if self.kind == "constant_one":
            return PathFunctional.constant_one()
        cylinder = PathFunctional.cylinder([f.build() for f in self.factors]) if self.factors else None
        if self.kind == "cylinder":
            if cylinder is None:
                raise ValueError("a cylinder functional needs at least one factor")
            return cylinder
        return PathFunctional.support_cutoff(self.A, cylinder)


class AppendixConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ks: List[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    configs_per_k: int = 5
    samples: int = 100_000
    dirichlet_trials: int = 20


class ExperimentConfig(BaseModel):
    """One experiment run; every field is validated before any computation starts."""

    model_config = ConfigDict(extra="forbid")

    experiment: Experiment
    law: LawConfig = Field(default_factory=LawConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    disorder: DisorderConfig = Field(default_factory=DisorderConfig)
    functional: FunctionalConfig = Field(default_factory=FunctionalConfig)
    psi: Optional[BumpProduct] = None
    appendix: AppendixConfig = Field(default_factory=AppendixConfig)
    replicas: int = 100
    seed: int = 0
    workers: int = DEFAULT_WORKERS
    output: str = "results"

    @field_validator("replicas")
    @classmethod
    def _replicas(cls, v: int) -> int:
        if v < 2:
            raise ValueError("replicas must be >= 2")
        return v

    @field_validator("workers")
    @classmethod
    def _workers(cls, v: int) -> int:
        if v < 1:
            raise ValueError("workers must be >= 1")
        return v

    def tail_law(self) -> TailLaw:
        return self.law.build()

    def path_functional(self) -> PathFunctional:
        return self.functional.build()

    def test_function(self) -> BumpProduct:
        return self.psi or BumpProduct.centered(self.geometry.d)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


# -- loading -----------------------------------------------------------------------

def _set_path(data: Dict[str, Any], path: str, value: Any) -> None:
    node = data
    parts = path.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
    node[parts[-1]] = value


def _field_name(loc) -> str:
    return ".".join(str(p) for p in loc)


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Read a JSON config (optional) and apply dotted-path overrides; overrides win.

    Raises:
        ValidationError: naming the first invalid field
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}", field="config")
        except json.JSONDecodeError as e:
            raise ValidationError(f"config file is not valid JSON: {e}", field="config")
    for key, value in (overrides or {}).items():
        if value is not None:
            _set_path(data, key, value)
    try:
        config = ExperimentConfig.model_validate(data)
    except PydanticValidationError as e:
        first = e.errors()[0]
        field = _field_name(first["loc"])
        raise ValidationError(f"{field}: {first['msg']}", field=field)
    validate_run(config)
    return config


def validate_run(config: ExperimentConfig) -> None:
    """Domain checks: α < α_c(d), β_N ∈ (0, 1) on every N, ψ inside the window, required grids."""
    try:
        law = config.tail_law()
        config.path_functional()
    except PolymerLabError:
        raise
    except (ValueError, PydanticValidationError) as e:
        raise ValidationError(str(e), field="law" if "alpha" in str(e) else "functional")

    exp = config.experiment
    d = config.geometry.d
    if exp == "verify-appendix":
        return
    if law.alpha >= alpha_critical(d):
        raise ValidationError(
            f"alpha={law.alpha} is not below alpha_c(d) = min(1+2/d, 2) = {alpha_critical(d):g} for d={d}; "
            "the limiting partition function is degenerate there",
            field="law.alpha",
        )
    needs_n = exp not in ("simulate-continuum",)
    n_values = config.geometry.n_values()
    if needs_n and not n_values:
        raise ValidationError("this experiment needs geometry.N or geometry.N_grid", field="geometry.N")
    for N in n_values:
        ScalingPlan.build(law, N, d, config.disorder.beta_hat)
    if exp in ("truncation-curve",) and not config.disorder.a_grid:
        raise ValidationError("truncation-curve needs disorder.a_grid", field="disorder.a_grid")
    if exp in ("converge", "simulate-continuum", "sample-paths", "moments") and config.disorder.a <= 0:
        raise ValidationError("the continuum side needs disorder.a > 0", field="disorder.a")
    if exp == "replica-moment" and math.isinf(config.disorder.b):
        raise ValidationError("replica-moment needs a finite disorder.b", field="disorder.b")

    psi = config.test_function()
    if psi.d != d:
        raise ValidationError("psi dimension does not match geometry.d", field="psi")
    (t_lo, t_hi), (x_lo, x_hi) = psi.support()
    if t_lo < 0 or t_hi > 1:
        raise ValidationError("psi time support must lie in [0, 1]", field="psi.t_center")
    if min(x_lo) < -config.geometry.L or max(x_hi) > config.geometry.L:
        raise ValidationError("window too small for the psi support", field="geometry.L")
