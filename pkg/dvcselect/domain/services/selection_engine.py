"""
Adaptive data selection: cold start, bandit-guided rounds and feedback.

Every round the bandit picks the sources to draw from, each candidate is
valued through the cache / statistics / LSH stack, the top of the ranking is
diversified into a batch, and the batch is fed back into the model, the
streaming statistics, the bandit and (every F rounds) the weight learner.
"""

import math
import time
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.bandit import BanditState
from ..models.network import ForwardTrace, MlpModel
from ..models.selection import RoundRecord, ScoredCandidate, SelectionConfig, SelectionReport
from ..models.sources import Sample, SourcePool, stack_samples
from ..models.valuation import MetricVector
from .grad_cache import GradCache
from .lsh_index import LshIndex
from .mlp_core import apply_gradient_step
from .online_stats import OnlineStatistics
from .source_bandit import source_probabilities, update_reward
from .value_metrics import MetricNormalizer, ValuationContext, compose_dvc, evaluate_metrics
from .weight_learner import AdaptiveWeightLearner, evaluate_performance
from ...shared.exceptions import ConfigurationError
from ...shared.logging import get_logger

logger = get_logger("dvcselect.selection")

AuditSink = Callable[[Dict[str, object]], None]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.clip(a @ b / (norm_a * norm_b), -1.0, 1.0))


def diversified_selection(
    candidates: Sequence[ScoredCandidate],
    batch_size: int,
    threshold: float = 0.95,
    quota: Optional[int] = None,
    relax_step: float = 0.02,
) -> Tuple[List[ScoredCandidate], float]:
    """Greedy value-ordered scan under a cosine gate and a per-source quota.

    ``candidates`` must already be sorted by value, highest first. When a full
    scan accepts fewer than ``batch_size`` candidates the threshold is raised
    by ``relax_step`` (up to 1.0) and the remaining candidates are rescanned.
    Returns the accepted candidates in value order and the final threshold.
    """
    accepted: Dict[int, ScoredCandidate] = {}
    digests = set()
    per_source: Dict[int, int] = {}
    theta = threshold
    while True:
        for position, candidate in enumerate(candidates):
            if len(accepted) >= batch_size:
                break
            if position in accepted or candidate.sample.digest in digests:
                continue
            if quota is not None and per_source.get(candidate.source, 0) >= quota:
                continue
            features = candidate.sample.features
            if any(_cosine(features, other.sample.features) > theta
                   for other in accepted.values()):
                continue
            accepted[position] = candidate
            digests.add(candidate.sample.digest)
            per_source[candidate.source] = per_source.get(candidate.source, 0) + 1
        if len(accepted) >= batch_size or theta >= 1.0:
            break
        theta = min(1.0, theta + relax_step)
    return [accepted[position] for position in sorted(accepted)], theta


class _AvailableSamples:
    """Not-yet-selected samples per source with O(1) removal."""

    def __init__(self, pool: SourcePool):
        self._items: List[List[Sample]] = [list(source.samples) for source in pool.sources]
        self._positions: List[Dict[int, int]] = [
            {sample.sample_id: i for i, sample in enumerate(items)} for items in self._items
        ]

    def count(self, source: int) -> int:
        return len(self._items[source])

    def get(self, source: int, position: int) -> Sample:
        return self._items[source][position]

    def remove(self, sample: Sample) -> None:
        positions = self._positions[sample.source]
        position = positions.pop(sample.sample_id, None)
        if position is None:
            return
        items = self._items[sample.source]
        last = items.pop()
        if position < len(items):
            items[position] = last
            positions[last.sample_id] = position


class SelectionEngine:
    """One selection session over a source pool and a model it updates in place."""

    def __init__(
        self,
        pool: SourcePool,
        model: MlpModel,
        config: SelectionConfig,
        audit_sink: Optional[AuditSink] = None,
    ):
        config.validate()
        self.budget = config.resolve_budget(pool.train_size)
        if config.batch_size > self.budget:
            raise ConfigurationError(
                f"batch size {config.batch_size} exceeds budget {self.budget}"
            )
        if self.budget < pool.num_sources:
            raise ConfigurationError(
                f"budget {self.budget} cannot give each of {pool.num_sources} sources a cold-start sample"
            )
        if model.input_dim != pool.feature_dim:
            raise ConfigurationError(
                f"model expects {model.input_dim} features, pool has {pool.feature_dim}"
            )
        if model.output_kind is not config.loss.output_kind:
            raise ConfigurationError("model output layer does not match the configured loss")
        if config.loss.is_classification and model.output_dim != pool.num_classes:
            raise ConfigurationError(
                f"model has {model.output_dim} outputs, pool has {pool.num_classes} classes"
            )

        self.pool = pool
        self.model = model
        self.config = config
        self.audit_sink = audit_sink
        self.rng = np.random.default_rng(config.seed)

        widths = list(model.layer_dims[1:])
        self.cache = GradCache(config.cache_capacity)
        self.stats = OnlineStatistics(
            widths,
            momentum_decay=config.momentum_decay,
            norm_buffer_size=config.norm_buffer_size,
            loss_window=config.loss_window,
            loss_history_capacity=config.loss_history_capacity,
            default_bandwidth=config.default_bandwidth,
            bandwidth_floor=config.bandwidth_floor,
        )
        self.indexes = [
            LshIndex(width, config.lsh_bits, config.lsh_tables,
                     seed=config.lsh_seed + layer, density_floor=config.density_floor)
            for layer, width in enumerate(widths)
        ]
        self.normalizer = MetricNormalizer()
        self.bandit = BanditState.create(
            pool.num_sources, config.exploration, config.probability_floor
        )
        self.weight_learner = AdaptiveWeightLearner(
            len(widths), config.weight_update_frequency, config.bayes_opt,
            config.mask, config.seed,
        )

        self.available = _AvailableSamples(pool)
        self.selected: List[Sample] = []
        self._selected_digests = set()
        self.total_seen = 0
        self.round_index = 0
        self._valuations = 0
        self._stability_cold = 0
        self.report = SelectionReport(budget=self.budget, pool_share=pool.source_shares())

    # -------------------------------------------------------------------------
    # Bookkeeping
    # -------------------------------------------------------------------------

    @property
    def remaining_budget(self) -> int:
        return self.budget - len(self.selected)

    def _take(self, sample: Sample) -> bool:
        """Claim ``sample`` for the draw in progress; False for a selected duplicate."""
        self.available.remove(sample)
        return sample.digest not in self._selected_digests

    def _mark_selected(self, samples: Sequence[Sample]) -> None:
        for sample in samples:
            self.selected.append(sample)
            self._selected_digests.add(sample.digest)
            self.report.selected_ids.append(sample.sample_id)
            self.report.selected_sources.append(sample.source)

    def _context(self) -> ValuationContext:
        return ValuationContext(
            model=self.model,
            stats=self.stats,
            indexes=self.indexes,
            total_seen=self.total_seen,
            weights=self.weight_learner.weights,
            top_k=self.config.lsh_top_k,
            quality_mode=self.config.quality_mode,
            symmetric_scale=self.config.symmetric_scale,
        )

    def _value(self, samples: Sequence[Sample]) -> List[Tuple[ScoredCandidate, ForwardTrace]]:
        """Raw metrics for every sample against one snapshot, then DVCs."""
        context = self._context()
        valued = []
        for sample in samples:
            trace, grads = self.cache.lookup(self.model, sample.features, sample.label, self.config.loss)
            self._valuations += 1
            if self.stats.loss_variance(sample.digest) is None:
                self._stability_cold += 1
            metrics = evaluate_metrics(context, trace, grads, sample.digest)
            valued.append((metrics, sample, trace))
        for metrics, _, _ in valued:
            self.normalizer.observe(metrics)
        weights = self.weight_learner.weights
        return [
            (ScoredCandidate(sample, metrics, compose_dvc(metrics, weights, self.normalizer)), trace)
            for metrics, sample, trace in valued
        ]

    def _absorb(self, samples: Sequence[Sample], update_stats: bool = True) -> None:
        """Fold samples into stats, LSH and loss history under the current model."""
        for sample in samples:
            trace, grads = self.cache.lookup(self.model, sample.features, sample.label, self.config.loss)
            if update_stats:
                self.stats.update(trace, grads)
            self.stats.record_loss(sample.digest, trace.model_version, trace.loss)
            for layer, index in enumerate(self.indexes, start=1):
                index.insert(sample.sample_id, trace.layer(layer))
            self.total_seen += 1

    def _update_model(self, samples: Sequence[Sample]) -> None:
        """One SGD epoch over ``samples`` in mini-batches of b."""
        order = self.rng.permutation(len(samples))
        batch_size = self.config.batch_size
        for start in range(0, len(samples), batch_size):
            chosen = [samples[i] for i in order[start:start + batch_size]]
            features, labels = stack_samples(chosen)
            apply_gradient_step(self.model, features, labels, self.config.learning_rate, self.config.loss)

    def _audit(self, scored: Sequence[ScoredCandidate], chosen_ids, phase: str) -> None:
        if self.audit_sink is None:
            return
        for candidate in scored:
            metrics: MetricVector = candidate.metrics
            self.audit_sink({
                "phase": phase,
                "round": self.round_index,
                "sample_id": candidate.sample.sample_id,
                "digest": candidate.sample.digest,
                "source": candidate.source,
                "raw": metrics.raw_dict(),
                "normalized": metrics.normalized_dict(),
                "dvc": candidate.dvc,
                "selected": candidate.sample.sample_id in chosen_ids,
            })

    # -------------------------------------------------------------------------
    # Phases
    # -------------------------------------------------------------------------

    def cold_start(self) -> List[Sample]:
        """ceil(B / 2K) uniform samples per source, then a warm model update."""
        per_source = math.ceil(self.budget / (2 * self.pool.num_sources))
        initial: List[Sample] = []
        initial_digests = set()
        for source in range(self.pool.num_sources):
            count = self.available.count(source)
            order = self.rng.permutation(count)
            drawn = [self.available.get(source, int(i)) for i in order]
            taken = 0
            for sample in drawn:
                if taken >= per_source or len(initial) >= self.budget:
                    break
                if self._take(sample) and sample.digest not in initial_digests:
                    initial.append(sample)
                    initial_digests.add(sample.digest)
                    taken += 1
            if taken < per_source:
                self.report.shortfalls[source] = per_source - taken
                logger.warning(
                    f"Source {source} supplied {taken} of {per_source} cold-start samples"
                )

        self._update_model(initial)
        for sample in initial:
            trace, grads = self.cache.lookup(self.model, sample.features, sample.label, self.config.loss)
            self.stats.update(trace, grads)
        scored = [candidate for candidate, _ in self._value(initial)]
        for candidate in scored:
            update_reward(self.bandit, candidate.source, candidate.dvc)
        self._absorb(initial, update_stats=False)

        self._mark_selected(initial)
        self.report.cold_start_ids = [s.sample_id for s in initial]
        self._audit(scored, set(self.report.cold_start_ids), "cold_start")
        logger.info(
            f"Cold start selected {len(initial)} samples ({per_source} per source "
            f"across {self.pool.num_sources} sources)"
        )
        return initial

    def _draw_candidates(self) -> Tuple[List[int], List[float], List[Sample]]:
        """Choose sources by bandit probabilities and draw up to 2b samples from each."""
        batch_size = self.config.batch_size
        while True:
            active = [i for i in range(self.pool.num_sources) if self.available.count(i) > 0]
            if not active:
                return [], [], []
            probabilities = source_probabilities(self.bandit)
            weights = probabilities[active] / probabilities[active].sum()
            chosen = self.rng.choice(
                active, size=min(batch_size, len(active)), replace=False, p=weights
            )
            candidates: List[Sample] = []
            round_digests = set()
            for source in (int(s) for s in chosen):
                count = self.available.count(source)
                picks = self.rng.choice(count, size=min(2 * batch_size, count), replace=False)
                drawn = [self.available.get(source, int(i)) for i in picks]
                for sample in drawn:
                    if sample.digest in self._selected_digests:
                        self.available.remove(sample)
                    elif sample.digest not in round_digests:
                        round_digests.add(sample.digest)
                        candidates.append(sample)
            if candidates:
                return [int(s) for s in chosen], probabilities.tolist(), candidates

    def selection_round(self) -> Optional[RoundRecord]:
        """One bandit-guided round; None once every source is exhausted."""
        if self.remaining_budget <= 0:
            return None
        chosen, probabilities, candidates = self._draw_candidates()
        if not candidates:
            return None

        config = self.config
        valued = self._value(candidates)
        scored = sorted((c for c, _ in valued), key=lambda c: -c.dvc)
        top = scored[:3 * config.batch_size]
        present = len({c.source for c in top})
        quota = config.round_quota(present) if present > 1 else None
        batch, threshold = diversified_selection(
            top, min(config.batch_size, self.remaining_budget),
            config.diversity_threshold, quota, config.relax_step,
        )
        batch_samples = [c.sample for c in batch]

        for sample in batch_samples:
            self.available.remove(sample)
        selected_ids = [s.sample_id for s in batch_samples]
        chosen_ids = set(selected_ids)
        for candidate, trace in valued:
            if candidate.sample.sample_id not in chosen_ids:
                self.stats.record_loss(candidate.sample.digest, trace.model_version, trace.loss)
        features, labels = stack_samples(batch_samples)
        apply_gradient_step(self.model, features, labels, config.learning_rate, config.loss)
        self._absorb(batch_samples)
        for candidate in batch:
            update_reward(self.bandit, candidate.source, candidate.dvc)
        self._mark_selected(batch_samples)

        self._audit(scored, chosen_ids, "round")
        values = np.array([c.dvc for c in scored])
        record = RoundRecord(
            round_index=self.round_index,
            sources_chosen=chosen,
            probabilities=probabilities,
            candidates_valued=len(scored),
            selected_ids=selected_ids,
            dvc_mean=float(values.mean()),
            dvc_min=float(values.min()),
            dvc_max=float(values.max()),
            final_threshold=threshold,
            model_version=self.model.version,
        )
        self.report.rounds.append(record)
        self._maybe_update_weights()
        self.round_index += 1
        return record

    def _maybe_update_weights(self) -> None:
        learner = self.weight_learner
        if not self.config.learn_weights or not learner.should_update(self.round_index):
            return
        if not self.pool.validation:
            logger.warning("No validation split; weight learning skipped")
            return
        current = learner.weights
        performance = evaluate_performance(
            current, self.selected, self.pool.validation, self.model.output_dim,
            self.config.probe, self.config.loss,
        )
        learner.record(self.round_index, performance)
        self.report.weight_trajectory.append(learner.observations[-1].to_dict())
        logger.info(
            f"Round {self.round_index}: probe score {performance:.4f}, "
            f"{len(learner.observations)} weight evaluations"
        )

    def finalize(self) -> SelectionReport:
        report = self.report
        report.terminated_early = len(self.selected) < self.budget
        report.final_weights = self.weight_learner.weights.to_dict()
        report.bandit = self.bandit.to_dict()
        cache = self.cache.stats()
        report.cache = {
            "hits": cache.hits, "misses": cache.misses,
            "hit_rate": cache.hit_rate, "occupancy": cache.occupancy,
        }
        report.skipped_observations = self.stats.skipped_observations
        report.stability_cold_start_fraction = (
            self._stability_cold / self._valuations if self._valuations else 0.0
        )
        return report

    def run(self) -> SelectionReport:
        """Cold start, then rounds until the budget is met or sources run dry."""
        started = time.perf_counter()
        self.cold_start()
        while self.remaining_budget > 0:
            if self.selection_round() is None:
                logger.info(
                    f"Sources exhausted after {len(self.selected)} of {self.budget} samples"
                )
                break
        report = self.finalize()
        report.select_seconds = time.perf_counter() - started
        return report


def cold_start(pool: SourcePool, model: MlpModel, config: SelectionConfig) -> List[Sample]:
    """Run only the cold-start phase of a fresh session."""
    return SelectionEngine(pool, model, config).cold_start()


def run_selection(
    pool: SourcePool,
    model: MlpModel,
    config: SelectionConfig,
    audit_sink: Optional[AuditSink] = None,
) -> SelectionReport:
    return SelectionEngine(pool, model, config, audit_sink).run()
