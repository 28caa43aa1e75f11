"""
The six value metrics and their aggregation into a DVC score.

Layer metrics (quality, relevance, diversity) are evaluated on metric layers
1..L; global metrics (gradient impact, uncertainty, stability) once per
sample. Raw metrics are commensurated with a running z-score followed by a
sigmoid before the convex combinations.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.special import expit

from ..models.network import ForwardTrace, LayerGradients, MlpModel, OutputKind
from ..models.valuation import MetricVector, MetricWeights, NormalizedMetrics
from .lsh_index import LshIndex
from .mlp_core import shannon_entropy
from .online_stats import GradientMomentum, LossHistory, OnlineStatistics, WelfordAccumulator
from ...shared.exceptions import ColdStartError, ConfigurationError

NEUTRAL_QUALITY = 0.5
ENTROPY_SMOOTHING = 1e-12
STABILITY_EPSILON = 1e-12


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.clip(a @ b / (norm_a * norm_b), -1.0, 1.0))


# =============================================================================
# Layer metrics
# =============================================================================

def quality(
    trace: ForwardTrace,
    stats: OnlineStatistics,
    layer: int,
    mode: str = "literal",
    symmetric_scale: float = 4.0,
) -> float:
    """Activation-norm quality of metric layer ``layer``."""
    try:
        median = stats.median_norm(layer)
    except ColdStartError:
        return NEUTRAL_QUALITY
    if median <= 0.0:
        return NEUTRAL_QUALITY
    ratio = float(np.linalg.norm(trace.layer(layer))) / median
    if mode == "symmetric":
        return float(expit(-abs(ratio - 1.0) * symmetric_scale))
    return float(expit(ratio - 1.0))


def relevance(grads: LayerGradients, momentum: GradientMomentum, layer: int) -> float:
    """Cosine between dl/dh_layer and its running average."""
    reference = momentum.layer(layer) if momentum.warm else None
    if reference is None:
        return 0.0
    return _cosine(grads.layer_grad(layer), reference)


def diversity(
    trace: ForwardTrace,
    index: LshIndex,
    sigma: float,
    total_seen: int,
    layer: int,
    top_k: int = 32,
) -> float:
    """Negative log kernel density of h_layer against already seen features."""
    density = index.kernel_density(trace.layer(layer), sigma, top_k, total_seen)
    return float(-np.log(density))


# =============================================================================
# Global metrics
# =============================================================================

def gradient_impact(grads: LayerGradients, momentum: GradientMomentum) -> float:
    """||g|| * cos(g, g_bar), i.e. the signed projection of g onto g_bar."""
    if not momentum.warm:
        return 0.0
    reference = momentum.flat_momentum
    reference_norm = float(np.linalg.norm(reference))
    if reference_norm == 0.0:
        return 0.0
    return float(grads.param_grad_flat @ reference / reference_norm)


def activation_entropy(activation: np.ndarray) -> float:
    """Entropy of the L1-normalised absolute activation vector."""
    magnitude = np.abs(np.asarray(activation, dtype=np.float64)) + ENTROPY_SMOOTHING
    return shannon_entropy(magnitude / magnitude.sum())


def conditional_uncertainty(
    model: MlpModel, trace: ForwardTrace, weights: MetricWeights
) -> float:
    """Output entropy (classifiers only) plus lambda-weighted activation entropies."""
    value = 0.0
    if model.output_kind is OutputKind.SOFTMAX:
        value += shannon_entropy(trace.output_probs)
    for layer, weight in enumerate(weights.layer_weights, start=1):
        if weight > 0.0:
            value += weight * activation_entropy(trace.layer(layer))
    return float(value)


def training_stability(history: LossHistory, sample_digest: str) -> float:
    """1 - Var / (running max Var + eps); 1.0 without history."""
    variance = history.loss_variance(sample_digest)
    if variance is None:
        return 1.0
    score = 1.0 - variance / (history.running_max_variance + STABILITY_EPSILON)
    return float(np.clip(score, 0.0, 1.0))


# =============================================================================
# Normalisation and aggregation
# =============================================================================

class MetricNormalizer:
    """Running z-score per (metric, layer) followed by a sigmoid."""

    def __init__(self):
        self._moments: Dict[str, WelfordAccumulator] = {}

    def _accumulator(self, key: str) -> WelfordAccumulator:
        accumulator = self._moments.get(key)
        if accumulator is None:
            accumulator = WelfordAccumulator()
            self._moments[key] = accumulator
        return accumulator

    @staticmethod
    def _entries(metrics: MetricVector):
        for layer in range(metrics.num_layers):
            yield f"quality/{layer + 1}", metrics.quality[layer]
            yield f"relevance/{layer + 1}", metrics.relevance[layer]
            yield f"diversity/{layer + 1}", metrics.diversity[layer]
        yield "gradient_impact", metrics.gradient_impact
        yield "uncertainty", metrics.uncertainty
        yield "stability", metrics.stability

    def observe(self, metrics: MetricVector) -> None:
        for key, value in self._entries(metrics):
            if np.isfinite(value):
                self._accumulator(key).update(value)

    def squash(self, key: str, value: float) -> float:
        accumulator = self._moments.get(key)
        if accumulator is None or accumulator.count < 2 or not np.isfinite(value):
            return 0.5
        std = float(np.sqrt(accumulator.variance()[0]))
        if std == 0.0:
            return 0.5
        return float(expit((value - float(accumulator.mean[0])) / std))

    def normalize(self, metrics: MetricVector) -> NormalizedMetrics:
        layers = range(metrics.num_layers)
        return NormalizedMetrics(
            quality=np.array([self.squash(f"quality/{l + 1}", metrics.quality[l]) for l in layers]),
            relevance=np.array([self.squash(f"relevance/{l + 1}", metrics.relevance[l]) for l in layers]),
            diversity=np.array([self.squash(f"diversity/{l + 1}", metrics.diversity[l]) for l in layers]),
            gradient_impact=self.squash("gradient_impact", metrics.gradient_impact),
            uncertainty=self.squash("uncertainty", metrics.uncertainty),
            stability=self.squash("stability", metrics.stability),
        )


def layer_value_contributions(normalized: NormalizedMetrics, weights: MetricWeights) -> np.ndarray:
    alpha, beta, gamma = weights.layer_metric
    return alpha * normalized.quality + beta * normalized.relevance + gamma * normalized.diversity


def global_value_contribution(normalized: NormalizedMetrics, weights: MetricWeights) -> float:
    xi, zeta, eta = weights.global_metric
    return float(
        xi * normalized.gradient_impact
        + zeta * normalized.uncertainty
        + eta * normalized.stability
    )


def compose_dvc(
    metrics: MetricVector,
    weights: MetricWeights,
    normalizer: Optional[MetricNormalizer] = None,
) -> float:
    """DVC = sum_l lambda_l LVC_l + mu GVC over normalised metrics."""
    if weights.num_layers != metrics.num_layers:
        raise ConfigurationError(
            f"weights cover {weights.num_layers} layers, metrics cover {metrics.num_layers}"
        )
    if normalizer is not None:
        metrics.normalized = normalizer.normalize(metrics)
    if metrics.normalized is None:
        raise ConfigurationError("metrics must be normalised before composing a DVC")
    lvc = layer_value_contributions(metrics.normalized, weights)
    gvc = global_value_contribution(metrics.normalized, weights)
    value = float(np.dot(weights.layer_weights, lvc) + weights.global_weight * gvc)
    metrics.dvc = float(np.clip(value, 0.0, 1.0))
    return metrics.dvc


# =============================================================================
# Per-sample evaluation
# =============================================================================

@dataclass
class ValuationContext:
    """Read-only snapshot every candidate in a round is valued against."""
    model: MlpModel
    stats: OnlineStatistics
    indexes: Sequence[LshIndex]
    total_seen: int
    weights: MetricWeights
    top_k: int = 32
    quality_mode: str = "literal"
    symmetric_scale: float = 4.0


def evaluate_metrics(
    context: ValuationContext,
    trace: ForwardTrace,
    grads: LayerGradients,
    sample_digest: str,
) -> MetricVector:
    """All six raw metrics of one sample."""
    stats = context.stats
    layers: List[int] = list(range(1, stats.num_layers + 1))
    return MetricVector(
        quality=[
            quality(trace, stats, l, context.quality_mode, context.symmetric_scale)
            for l in layers
        ],
        relevance=[relevance(grads, stats.momentum, l) for l in layers],
        diversity=[
            diversity(
                trace, context.indexes[l - 1], stats.bandwidth(l),
                context.total_seen, l, context.top_k,
            )
            for l in layers
        ],
        gradient_impact=gradient_impact(grads, stats.momentum),
        uncertainty=conditional_uncertainty(context.model, trace, context.weights),
        stability=training_stability(stats.history, sample_digest),
    )
