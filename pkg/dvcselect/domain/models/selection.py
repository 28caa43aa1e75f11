"""
Domain models for a selection run: its configuration, the per-round records
and the final report.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from .network import Activation, LossKind
from .sources import Sample
from .valuation import AblationMask, MetricVector
from ...shared.exceptions import ConfigurationError

QUALITY_MODES = ("literal", "symmetric")


# =============================================================================
# Value Objects
# =============================================================================

@dataclass(frozen=True)
class BayesOptConfig:
    """Surrogate, acquisition and stopping constants of the weight search."""
    length_scale: float = 0.3
    signal_variance: float = 1.0
    jitter: float = 1e-6
    jitter_escalations: int = 3
    dirichlet_candidates: int = 256
    local_perturbations: int = 32
    perturbation_scale: float = 0.05
    max_evaluations: int = 15
    patience: int = 3
    min_improvement: float = 0.002
    quadratic_trend: bool = True
    initial_points: int = 5


@dataclass(frozen=True)
class ProbeConfig:
    """Probe network trained to score a weight setting."""
    hidden_dims: Tuple[int, ...] = (64, 32)
    activation: Activation = Activation.RELU
    epochs: int = 5
    learning_rate: float = 0.05
    batch_size: int = 32
    seed: int = 0


@dataclass(frozen=True)
class SelectionConfig:
    """Budget, batch geometry and every constant a selection run reads.

    ``budget`` is either a sample count or, when a float in (0, 1], a
    fraction of the training pool.
    """
    budget: Union[int, float]
    batch_size: int = 8
    weight_update_frequency: int = 5
    diversity_threshold: float = 0.95
    relax_step: float = 0.02
    source_quota: Optional[int] = None
    seed: int = 0
    learning_rate: float = 0.05
    loss: LossKind = field(default_factory=LossKind.cross_entropy)

    cache_capacity: int = 4096
    momentum_decay: float = 0.9
    norm_buffer_size: int = 512
    loss_window: int = 8
    loss_history_capacity: int = 16384
    default_bandwidth: float = 1.0
    bandwidth_floor: float = 1e-6

    lsh_bits: int = 12
    lsh_tables: int = 16
    lsh_top_k: int = 32
    lsh_seed: int = 17
    density_floor: float = 1e-12

    quality_mode: str = "literal"
    symmetric_scale: float = 4.0
    mask: Optional[AblationMask] = None

    exploration: float = 1.0
    probability_floor: float = 0.01

    learn_weights: bool = True
    bayes_opt: BayesOptConfig = field(default_factory=BayesOptConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    def validate(self) -> None:
        if isinstance(self.budget, bool) or self.budget <= 0:
            raise ConfigurationError(f"budget must be positive, got {self.budget}")
        if isinstance(self.budget, float) and self.budget > 1.0:
            raise ConfigurationError("a fractional budget must lie in (0, 1]")
        if self.batch_size < 1:
            raise ConfigurationError("batch size must be >= 1")
        if self.weight_update_frequency < 1:
            raise ConfigurationError("weight update frequency must be >= 1")
        if not 0.0 < self.diversity_threshold <= 1.0:
            raise ConfigurationError("diversity threshold must lie in (0, 1]")
        if self.relax_step <= 0.0:
            raise ConfigurationError("relaxation step must be positive")
        if self.source_quota is not None and self.source_quota < 1:
            raise ConfigurationError("source quota must be >= 1")
        if self.learning_rate < 0.0:
            raise ConfigurationError("learning rate must be non-negative")
        if self.quality_mode not in QUALITY_MODES:
            raise ConfigurationError(
                f"quality mode must be one of {QUALITY_MODES}, got {self.quality_mode!r}"
            )

    def resolve_budget(self, pool_size: int) -> int:
        """Sample-count budget for a pool of ``pool_size`` training samples."""
        if isinstance(self.budget, float):
            return max(1, int(round(self.budget * pool_size)))
        return int(self.budget)

    def round_quota(self, sources_present: int) -> int:
        """Most samples one source may place in a batch drawn from ``sources_present`` sources.

        The default is ceil(b / 2), raised to b - (k - 1) so that with few
        sources the quota only keeps one slot per competing source free.
        """
        if self.source_quota is not None:
            return self.source_quota
        return max(math.ceil(self.batch_size / 2), self.batch_size - (sources_present - 1))


@dataclass
class ScoredCandidate:
    """A candidate with its metrics and DVC at valuation time."""
    sample: Sample
    metrics: MetricVector
    dvc: float

    @property
    def source(self) -> int:
        return self.sample.source


@dataclass
class RoundRecord:
    """What happened in one selection round."""
    round_index: int
    sources_chosen: List[int]
    probabilities: List[float]
    candidates_valued: int
    selected_ids: List[int]
    dvc_mean: float
    dvc_min: float
    dvc_max: float
    final_threshold: float
    model_version: int

    def to_dict(self) -> Dict[str, object]:
        return {
            "round": self.round_index,
            "sources_chosen": self.sources_chosen,
            "probabilities": self.probabilities,
            "candidates_valued": self.candidates_valued,
            "selected_ids": self.selected_ids,
            "dvc_mean": self.dvc_mean,
            "dvc_min": self.dvc_min,
            "dvc_max": self.dvc_max,
            "final_threshold": self.final_threshold,
            "model_version": self.model_version,
        }


# =============================================================================
# Aggregates
# =============================================================================

@dataclass
class SelectionReport:
    """Everything a selection run produced."""
    budget: int
    selected_ids: List[int] = field(default_factory=list)
    selected_sources: List[int] = field(default_factory=list)
    cold_start_ids: List[int] = field(default_factory=list)
    shortfalls: Dict[int, int] = field(default_factory=dict)
    rounds: List[RoundRecord] = field(default_factory=list)
    weight_trajectory: List[Dict[str, object]] = field(default_factory=list)
    final_weights: Optional[Dict[str, object]] = None
    bandit: Optional[Dict[str, object]] = None
    cache: Optional[Dict[str, float]] = None
    skipped_observations: int = 0
    stability_cold_start_fraction: float = 0.0
    pool_share: List[float] = field(default_factory=list)
    terminated_early: bool = False
    final_accuracy: Optional[float] = None
    final_f1: Optional[float] = None
    select_seconds: float = 0.0
    train_seconds: Optional[float] = None
    full_train_seconds: Optional[float] = None

    @property
    def alpha_ratio(self) -> Optional[float]:
        """Select-phase time over full-pool training time."""
        if not self.full_train_seconds:
            return None
        return self.select_seconds / self.full_train_seconds

    @property
    def selected_share(self) -> List[float]:
        counts = [0] * len(self.pool_share)
        for source in self.selected_sources:
            counts[source] += 1
        total = len(self.selected_sources)
        return [c / total if total else 0.0 for c in counts]

    def to_dict(self, include_timings: bool = True) -> Dict[str, object]:
        data: Dict[str, object] = {
            "budget": self.budget,
            "selected": [
                {"id": sample_id, "source": source}
                for sample_id, source in zip(self.selected_ids, self.selected_sources)
            ],
            "cold_start_ids": self.cold_start_ids,
            "shortfalls": {str(k): v for k, v in sorted(self.shortfalls.items())},
            "rounds": [r.to_dict() for r in self.rounds],
            "weight_trajectory": self.weight_trajectory,
            "final_weights": self.final_weights,
            "bandit": self.bandit,
            "cache": self.cache,
            "skipped_observations": self.skipped_observations,
            "stability_cold_start_fraction": self.stability_cold_start_fraction,
            "pool_share": self.pool_share,
            "selected_share": self.selected_share,
            "terminated_early": self.terminated_early,
            "final_accuracy": self.final_accuracy,
            "final_f1": self.final_f1,
        }
        if include_timings:
            data["select_seconds"] = self.select_seconds
            data["train_seconds"] = self.train_seconds
            data["full_train_seconds"] = self.full_train_seconds
            data["alpha_ratio"] = self.alpha_ratio
        return data
