"""
Domain models for sample valuation.

MetricWeights lives on a product of three simplices:
(lambda_1..lambda_L, mu), (alpha, beta, gamma) and (xi, zeta, eta).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np

from ...shared.exceptions import ConfigurationError

SIMPLEX_TOLERANCE = 1e-9


class MetricName(Enum):
    """The six value metrics."""
    QUALITY = "quality"
    RELEVANCE = "relevance"
    DIVERSITY = "diversity"
    GRADIENT_IMPACT = "gradient_impact"
    UNCERTAINTY = "uncertainty"
    STABILITY = "stability"

    @property
    def is_layer_metric(self) -> bool:
        return self in (MetricName.QUALITY, MetricName.RELEVANCE, MetricName.DIVERSITY)


LAYER_METRICS = (MetricName.QUALITY, MetricName.RELEVANCE, MetricName.DIVERSITY)
GLOBAL_METRICS = (MetricName.GRADIENT_IMPACT, MetricName.UNCERTAINTY, MetricName.STABILITY)


@dataclass(frozen=True)
class AblationMask:
    """Metrics whose weight is pinned to zero."""
    disabled: FrozenSet[MetricName] = frozenset()

    def __post_init__(self):
        if set(LAYER_METRICS) <= self.disabled and set(GLOBAL_METRICS) <= self.disabled:
            raise ConfigurationError("at least one metric must stay enabled")

    @classmethod
    def from_names(cls, names: Iterable[str]) -> 'AblationMask':
        try:
            return cls(frozenset(MetricName(name) for name in names))
        except ValueError as e:
            raise ConfigurationError(f"unknown metric in ablation mask: {e}")

    @property
    def layer_group_disabled(self) -> bool:
        return set(LAYER_METRICS) <= self.disabled

    @property
    def global_group_disabled(self) -> bool:
        return set(GLOBAL_METRICS) <= self.disabled

    def names(self) -> Tuple[str, ...]:
        return tuple(sorted(m.value for m in self.disabled))


# Named variants of the ablation study
ABLATION_VARIANTS: Dict[str, AblationMask] = {
    "full": AblationMask(),
    "no_quality": AblationMask(frozenset({MetricName.QUALITY})),
    "no_relevance": AblationMask(frozenset({MetricName.RELEVANCE})),
    "no_diversity": AblationMask(frozenset({MetricName.DIVERSITY})),
    "no_gradient_impact": AblationMask(frozenset({MetricName.GRADIENT_IMPACT})),
    "no_uncertainty": AblationMask(frozenset({MetricName.UNCERTAINTY})),
    "no_stability": AblationMask(frozenset({MetricName.STABILITY})),
    "layer_only": AblationMask(frozenset(GLOBAL_METRICS)),
    "global_only": AblationMask(frozenset(LAYER_METRICS)),
    "minimal": AblationMask(frozenset({
        MetricName.DIVERSITY, MetricName.GRADIENT_IMPACT,
        MetricName.UNCERTAINTY, MetricName.STABILITY,
    })),
}


def project_to_simplex(vector) -> np.ndarray:
    """Euclidean projection onto {w >= 0, sum(w) = 1} by sort-and-threshold."""
    v = np.asarray(vector, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ConfigurationError("simplex projection needs a non-empty vector")
    if np.all(v >= 0.0) and abs(v.sum() - 1.0) <= SIMPLEX_TOLERANCE:
        return v.copy()
    ordered = np.sort(v)[::-1]
    cumulative = np.cumsum(ordered) - 1.0
    ranks = np.arange(1, v.size + 1)
    rho = np.nonzero(ordered - cumulative / ranks > 0)[0][-1]
    threshold = cumulative[rho] / (rho + 1)
    return np.maximum(v - threshold, 0.0)


def _check_simplex(name: str, values: np.ndarray) -> None:
    if np.any(values < -SIMPLEX_TOLERANCE) or abs(values.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise ConfigurationError(
            f"{name} weights must be non-negative and sum to 1, got {values.tolist()}"
        )


def _mask_group(values: np.ndarray, disabled: np.ndarray) -> np.ndarray:
    """Zero the disabled coordinates and renormalise the rest."""
    masked = np.where(disabled, 0.0, values)
    total = masked.sum()
    if total <= 0.0:
        enabled = ~disabled
        return enabled / enabled.sum()
    return masked / total


# =============================================================================
# Value Objects
# =============================================================================

@dataclass(frozen=True)
class MetricWeights:
    """Adaptive weights Theta on a product of three simplices."""
    layer_weights: Tuple[float, ...]
    global_weight: float
    layer_metric: Tuple[float, float, float]
    global_metric: Tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "layer_weights", tuple(float(w) for w in self.layer_weights))
        object.__setattr__(self, "global_weight", float(self.global_weight))
        object.__setattr__(self, "layer_metric", tuple(float(w) for w in self.layer_metric))
        object.__setattr__(self, "global_metric", tuple(float(w) for w in self.global_metric))
        if len(self.layer_weights) < 1:
            raise ConfigurationError("at least one layer weight is required")
        if len(self.layer_metric) != 3 or len(self.global_metric) != 3:
            raise ConfigurationError("metric groups hold exactly three weights")
        _check_simplex("layer/global", np.array(self.layer_weights + (self.global_weight,)))
        _check_simplex("layer-metric", np.array(self.layer_metric))
        _check_simplex("global-metric", np.array(self.global_metric))

    @classmethod
    def uniform(cls, num_layers: int) -> 'MetricWeights':
        share = 1.0 / (num_layers + 1)
        third = 1.0 / 3.0
        return cls((share,) * num_layers, share, (third,) * 3, (third,) * 3)

    @classmethod
    def from_flat(cls, flat, num_layers: int) -> 'MetricWeights':
        values = np.asarray(flat, dtype=np.float64)
        if values.shape != (num_layers + 7,):
            raise ConfigurationError(
                f"flat weights have shape {values.shape}, expected ({num_layers + 7},)"
            )
        return cls(
            tuple(values[:num_layers]),
            values[num_layers],
            tuple(values[num_layers + 1:num_layers + 4]),
            tuple(values[num_layers + 4:]),
        )

    @classmethod
    def project(cls, flat, num_layers: int) -> 'MetricWeights':
        """Project an arbitrary flat vector group-wise onto the simplices."""
        values = np.asarray(flat, dtype=np.float64)
        groups = cls.split(values, num_layers)
        return cls.from_flat(
            np.concatenate([project_to_simplex(g) for g in groups]), num_layers
        )

    @staticmethod
    def split(flat: np.ndarray, num_layers: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            flat[:num_layers + 1],
            flat[num_layers + 1:num_layers + 4],
            flat[num_layers + 4:num_layers + 7],
        )

    @property
    def num_layers(self) -> int:
        return len(self.layer_weights)

    def flatten(self) -> np.ndarray:
        return np.array(
            self.layer_weights + (self.global_weight,) + self.layer_metric + self.global_metric
        )

    def masked(self, mask: Optional[AblationMask]) -> 'MetricWeights':
        """Weights with every disabled metric pinned to zero."""
        if mask is None or not mask.disabled:
            return self
        first = np.array(self.layer_weights + (self.global_weight,))
        first_disabled = np.zeros(first.size, dtype=bool)
        if mask.layer_group_disabled:
            first_disabled[:-1] = True
        if mask.global_group_disabled:
            first_disabled[-1] = True
        layer_disabled = np.array([m in mask.disabled for m in LAYER_METRICS])
        global_disabled = np.array([m in mask.disabled for m in GLOBAL_METRICS])

        first = _mask_group(first, first_disabled)
        # a fully disabled group keeps a valid simplex point; its outer weight is already 0
        layer_metric = (
            np.full(3, 1.0 / 3.0) if layer_disabled.all()
            else _mask_group(np.array(self.layer_metric), layer_disabled)
        )
        global_metric = (
            np.full(3, 1.0 / 3.0) if global_disabled.all()
            else _mask_group(np.array(self.global_metric), global_disabled)
        )
        return MetricWeights(
            tuple(first[:-1]), first[-1], tuple(layer_metric), tuple(global_metric)
        )

    def to_dict(self) -> Dict[str, object]:
        return {
            "layer_weights": list(self.layer_weights),
            "global_weight": self.global_weight,
            "layer_metric": list(self.layer_metric),
            "global_metric": list(self.global_metric),
        }


@dataclass(frozen=True)
class NormalizedMetrics:
    """Metric values squashed to [0, 1]."""
    quality: np.ndarray
    relevance: np.ndarray
    diversity: np.ndarray
    gradient_impact: float
    uncertainty: float
    stability: float


@dataclass
class MetricVector:
    """Raw metrics of one sample, optionally with normalised copies and DVC."""
    quality: np.ndarray
    relevance: np.ndarray
    diversity: np.ndarray
    gradient_impact: float
    uncertainty: float
    stability: float
    normalized: Optional[NormalizedMetrics] = None
    dvc: Optional[float] = None

    def __post_init__(self):
        self.quality = np.asarray(self.quality, dtype=np.float64)
        self.relevance = np.asarray(self.relevance, dtype=np.float64)
        self.diversity = np.asarray(self.diversity, dtype=np.float64)
        if not (self.quality.shape == self.relevance.shape == self.diversity.shape):
            raise ConfigurationError("layer metrics must have one value per layer")

    @property
    def num_layers(self) -> int:
        return int(self.quality.shape[0])

    def raw_dict(self) -> Dict[str, object]:
        return {
            "quality": self.quality.tolist(),
            "relevance": self.relevance.tolist(),
            "diversity": self.diversity.tolist(),
            "gradient_impact": self.gradient_impact,
            "uncertainty": self.uncertainty,
            "stability": self.stability,
        }

    def normalized_dict(self) -> Optional[Dict[str, object]]:
        if self.normalized is None:
            return None
        n = self.normalized
        return {
            "quality": n.quality.tolist(),
            "relevance": n.relevance.tolist(),
            "diversity": n.diversity.tolist(),
            "gradient_impact": n.gradient_impact,
            "uncertainty": n.uncertainty,
            "stability": n.stability,
        }
