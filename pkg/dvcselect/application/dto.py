"""
Data Transfer Objects for application layer.

Experiment descriptions are validated pydantic models; results are plain
dataclasses with deterministic ``to_dict`` forms.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar

import pydantic
from pydantic import BaseModel, Field, field_validator, model_validator

from ..domain.models.valuation import ABLATION_VARIANTS, MetricName
from ..shared.exceptions import ConfigurationError

METHODS = ("dvc", "random", "uncertainty", "full")

Spec = TypeVar("Spec", bound=BaseModel)


# ==================== Request models ====================

class DatasetSpec(BaseModel):
    kind: Literal["synthetic", "tabular"] = "synthetic"
    path: Optional[str] = None
    label_column: str = Field("label", min_length=1)
    source_column: str = Field("source", min_length=1)
    num_sources: int = Field(6, ge=1)
    validation_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    test_fraction: float = Field(0.2, ge=0.0, lt=1.0)
    pool_size: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _path_for_tabular(self) -> "DatasetSpec":
        if self.kind == "tabular" and not self.path:
            raise ValueError("a tabular dataset needs a path")
        return self


def _check_fractions(values: List[float]) -> List[float]:
    for value in values:
        if not 0.0 < value <= 1.0:
            raise ValueError(f"budget fraction {value} outside (0, 1]")
    return values


class ExperimentSpec(BaseModel):
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    budgets: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4], min_length=1)
    methods: List[Literal["dvc", "random", "uncertainty", "full"]] = Field(
        default_factory=lambda: ["dvc", "random", "uncertainty"], min_length=1
    )
    disabled_metrics: List[str] = Field(default_factory=list)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    output_dir: Optional[str] = None

    @field_validator("budgets")
    @classmethod
    def _budgets_in_range(cls, values: List[float]) -> List[float]:
        return _check_fractions(values)

    @field_validator("disabled_metrics")
    @classmethod
    def _known_metrics(cls, values: List[str]) -> List[str]:
        known = {m.value for m in MetricName}
        for value in values:
            if value not in known:
                raise ValueError(f"unknown metric {value!r}")
        return values


class ScalingSpec(BaseModel):
    pool_sizes: List[int] = Field(default_factory=lambda: [20000, 40000, 80000], min_length=1)
    budget: float = Field(0.1, gt=0.0, le=1.0)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)

    @field_validator("pool_sizes")
    @classmethod
    def _positive_sizes(cls, values: List[int]) -> List[int]:
        if any(v < 1 for v in values):
            raise ValueError("pool sizes must be positive")
        return sorted(values)


class AblationSpec(BaseModel):
    dataset: DatasetSpec = Field(default_factory=DatasetSpec)
    budget: float = Field(0.2, gt=0.0, le=1.0)
    variants: List[str] = Field(default_factory=lambda: list(ABLATION_VARIANTS), min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)

    @field_validator("variants")
    @classmethod
    def _known_variants(cls, values: List[str]) -> List[str]:
        for value in values:
            if value not in ABLATION_VARIANTS:
                raise ValueError(f"unknown ablation variant {value!r}")
        return values


class RegretSpec(BaseModel):
    means: List[float] = Field(default_factory=lambda: [0.9, 0.8], min_length=1)
    horizons: List[int] = Field(default_factory=lambda: [2000, 20000], min_length=1)
    seeds: List[int] = Field(default_factory=lambda: list(range(20)), min_length=1)
    exploration: float = Field(1.0, ge=0.0)

    @field_validator("means")
    @classmethod
    def _bounded_means(cls, values: List[float]) -> List[float]:
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ValueError("arm means must lie in [0, 1]")
        return values

    @field_validator("horizons")
    @classmethod
    def _positive_horizons(cls, values: List[int]) -> List[int]:
        if any(v < 1 for v in values):
            raise ValueError("horizons must be positive")
        return sorted(values)


def parse_spec(model: Type[Spec], data: Optional[Dict[str, Any]]) -> Spec:
    """Validate ``data`` against ``model``, surfacing failures as ConfigurationError."""
    try:
        return model.model_validate(data or {})
    except pydantic.ValidationError as e:
        raise ConfigurationError(f"invalid {model.__name__}: {e}")


# ==================== Results ====================

@dataclass
class CellResult:
    """One (method, budget, seed) cell."""
    method: str
    budget: float
    seed: int
    accuracy: Optional[float] = None
    macro_f1: Optional[float] = None
    selected: Optional[int] = None
    select_seconds: Optional[float] = None
    train_seconds: Optional[float] = None
    error: Optional[str] = None
    error_class: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self, include_timings: bool = True) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "method": self.method,
            "budget": self.budget,
            "seed": self.seed,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "selected": self.selected,
            "error": self.error,
            "error_class": self.error_class,
        }
        if include_timings:
            data["select_seconds"] = self.select_seconds
            data["train_seconds"] = self.train_seconds
        return data


@dataclass
class AggregateRow:
    """Mean and standard deviation of one (method, budget) group across seeds."""
    method: str
    budget: float
    accuracy_mean: Optional[float]
    accuracy_std: Optional[float]
    f1_mean: Optional[float]
    f1_std: Optional[float]
    cells: int
    failures: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "budget": self.budget,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "f1_mean": self.f1_mean,
            "f1_std": self.f1_std,
            "cells": self.cells,
            "failures": self.failures,
        }


@dataclass
class ExperimentResult:
    cells: List[CellResult] = field(default_factory=list)
    rows: List[AggregateRow] = field(default_factory=list)

    def to_dict(self, include_timings: bool = False) -> Dict[str, Any]:
        return {
            "cells": [c.to_dict(include_timings) for c in self.cells],
            "rows": [r.to_dict() for r in self.rows],
        }


@dataclass
class ScalingRow:
    pool_size: int
    select_seconds: float
    selection_train_seconds: float
    full_train_seconds: float
    accuracy_dvc: float
    accuracy_full: float

    @property
    def speedup(self) -> float:
        spent = self.select_seconds + self.selection_train_seconds
        return self.full_train_seconds / spent if spent > 0 else float("inf")

    @property
    def proximity_pass(self) -> bool:
        return proximity_pass(self.accuracy_full, self.accuracy_dvc)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pool_size": self.pool_size,
            "select_seconds": self.select_seconds,
            "selection_train_seconds": self.selection_train_seconds,
            "full_train_seconds": self.full_train_seconds,
            "speedup": self.speedup,
            "accuracy_dvc": self.accuracy_dvc,
            "accuracy_full": self.accuracy_full,
            "proximity_pass": self.proximity_pass,
        }


@dataclass
class ScalingResult:
    rows: List[ScalingRow] = field(default_factory=list)
    select_time_slope: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "select_time_slope": self.select_time_slope,
        }


@dataclass
class AblationRow:
    variant: str
    disabled: List[str]
    accuracy_mean: Optional[float]
    accuracy_std: Optional[float]
    delta_vs_full: Optional[float]
    failures: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "variant": self.variant,
            "disabled": self.disabled,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "delta_vs_full": self.delta_vs_full,
            "failures": self.failures,
        }


@dataclass
class AblationResult:
    budget: float
    rows: List[AblationRow] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {"budget": self.budget, "rows": [r.to_dict() for r in self.rows]}


@dataclass
class RegretRow:
    horizon: int
    mean_regret: float
    std_regret: float
    analytic_bound: float

    @property
    def regret_per_round(self) -> float:
        return self.mean_regret / self.horizon

    def to_dict(self) -> Dict[str, Any]:
        return {
            "horizon": self.horizon,
            "mean_regret": self.mean_regret,
            "std_regret": self.std_regret,
            "analytic_bound": self.analytic_bound,
            "regret_per_round": self.regret_per_round,
            "below_bound": self.mean_regret < self.analytic_bound,
        }


@dataclass
class RegretResult:
    rows: List[RegretRow] = field(default_factory=list)
    log_log_slope: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "log_log_slope": self.log_log_slope,
        }


def proximity_pass(accuracy_full: float, accuracy_selected: float) -> bool:
    """|acc(selected) - acc(full)| <= acc(full) / 25."""
    return abs(accuracy_selected - accuracy_full) <= accuracy_full / 25.0 + 1e-12
