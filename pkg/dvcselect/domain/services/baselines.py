"""
Reference selectors: uniform random and entropy-based uncertainty sampling.

The uncertainty baseline shares the DVC engine's cold start, batch size and
model-update rule so that the comparison isolates the scoring function.
"""

import math
from typing import List

import numpy as np

from ..models.network import LossKind, MlpModel
from ..models.sources import Sample, SourcePool, stack_samples
from .mlp_core import apply_gradient_step, batch_entropy, train
from ...shared.exceptions import ConfigurationError
from ...shared.logging import get_logger

logger = get_logger("dvcselect.baselines")


def baseline_random(pool: SourcePool, budget: int, seed: int = 0) -> List[Sample]:
    """Uniform sample of ``budget`` training samples without replacement."""
    samples = pool.train_samples
    if budget < 1:
        raise ConfigurationError(f"budget must be positive, got {budget}")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(samples), size=min(budget, len(samples)), replace=False)
    return [samples[int(i)] for i in picks]


def uniform_cold_start(
    pool: SourcePool, budget: int, rng: np.random.Generator
) -> List[Sample]:
    """ceil(B / 2K) uniform draws per source, capped by the source size."""
    per_source = math.ceil(budget / (2 * pool.num_sources))
    chosen: List[Sample] = []
    for source in pool.sources:
        take = min(per_source, len(source), budget - len(chosen))
        if take <= 0:
            break
        picks = rng.choice(len(source), size=take, replace=False)
        chosen.extend(source.samples[int(i)] for i in picks)
    return chosen


def baseline_uncertainty(
    pool: SourcePool,
    model: MlpModel,
    budget: int,
    batch_size: int = 8,
    learning_rate: float = 0.05,
    seed: int = 0,
) -> List[Sample]:
    """Highest-entropy batches under the evolving model; seeded tie-breaks."""
    if budget < 1 or batch_size < 1:
        raise ConfigurationError("budget and batch size must be positive")
    loss = LossKind.cross_entropy()
    rng = np.random.default_rng(seed)
    selected = uniform_cold_start(pool, budget, rng)
    if selected:
        features, labels = stack_samples(selected)
        train(model, features, labels, loss, 1, learning_rate, batch_size, seed)

    taken = {s.sample_id for s in selected}
    remaining = [s for s in pool.train_samples if s.sample_id not in taken]
    features = np.stack([s.features for s in remaining]) if remaining else None
    alive = np.ones(len(remaining), dtype=bool)
    while len(selected) < budget and alive.any():
        positions = np.flatnonzero(alive)
        entropy = batch_entropy(model, features[positions])
        # primary key: entropy descending; secondary: seeded random order
        order = np.lexsort((rng.random(positions.size), -entropy))
        count = min(batch_size, budget - len(selected), positions.size)
        batch_positions = positions[order[:count]]
        batch = [remaining[int(i)] for i in batch_positions]
        alive[batch_positions] = False
        selected.extend(batch)
        batch_features, batch_labels = stack_samples(batch)
        apply_gradient_step(model, batch_features, batch_labels, learning_rate, loss)
    logger.debug(f"Uncertainty baseline selected {len(selected)} samples")
    return selected
