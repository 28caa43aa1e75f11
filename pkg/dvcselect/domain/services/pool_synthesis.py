"""
Synthetic multi-source pools with controlled corruption.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..models.sources import CorruptionSpec, DataSource, Sample, SourcePool, Split
from ...shared.exceptions import ConfigurationError
from ...shared.logging import get_logger

logger = get_logger("dvcselect.synthesis")

DEFAULT_FLIP_RATES = (0.0, 0.05, 0.1, 0.2, 0.3, 0.4)


@dataclass(frozen=True)
class SynthesisSpec:
    """Gaussian-mixture generator parameters and per-source corruption."""
    num_classes: int = 4
    num_features: int = 32
    num_sources: int = 6
    pool_size: int = 12000
    validation_size: int = 1000
    test_size: int = 2000
    clusters_per_class: int = 2
    separation: float = 2.0
    flip_rates: Tuple[float, ...] = DEFAULT_FLIP_RATES
    noise_levels: Optional[Tuple[float, ...]] = None
    duplication_factors: Optional[Tuple[int, ...]] = None
    seed: int = 0

    def corruption(self) -> List[CorruptionSpec]:
        """Per-source corruption; raises ConfigurationError when infeasible."""
        k = self.num_sources
        noise = self.noise_levels if self.noise_levels is not None else (0.0,) * k
        duplication = (
            self.duplication_factors if self.duplication_factors is not None else (1,) * k
        )
        for name, values in (("flip_rates", self.flip_rates), ("noise_levels", noise),
                             ("duplication_factors", duplication)):
            if len(values) != k:
                raise ConfigurationError(f"{name} has {len(values)} entries for {k} sources")
        try:
            return [CorruptionSpec(f, n, d) for f, n, d in zip(self.flip_rates, noise, duplication)]
        except ValueError as e:
            raise ConfigurationError(f"infeasible corruption spec: {e}")

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ConfigurationError("synthetic pools need at least two classes")
        if self.num_features < 1 or self.num_sources < 1 or self.clusters_per_class < 1:
            raise ConfigurationError("features, sources and clusters must all be positive")
        if self.pool_size < self.num_sources:
            raise ConfigurationError(
                f"pool of {self.pool_size} cannot feed {self.num_sources} sources"
            )
        if self.validation_size < 0 or self.test_size < 0:
            raise ConfigurationError("split sizes must be non-negative")
        if self.separation <= 0.0:
            raise ConfigurationError("cluster separation must be positive")
        self.corruption()


def flip_labels(
    labels: np.ndarray, rate: float, num_classes: int, rng: np.random.Generator
) -> np.ndarray:
    """Move a ``rate`` fraction of labels uniformly onto one of the other classes."""
    flipped = labels.copy()
    mask = rng.random(labels.shape[0]) < rate
    offsets = rng.integers(1, num_classes, size=int(mask.sum()))
    flipped[mask] = (labels[mask] + offsets) % num_classes
    return flipped


def _mixture(
    spec: SynthesisSpec, total: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    centers = rng.standard_normal((spec.num_classes, spec.clusters_per_class, spec.num_features))
    centers *= spec.separation / np.linalg.norm(centers, axis=2, keepdims=True)
    labels = rng.permutation(np.arange(total) % spec.num_classes)
    clusters = rng.integers(0, spec.clusters_per_class, size=total)
    features = centers[labels, clusters] + rng.standard_normal((total, spec.num_features))
    return features, labels.astype(np.int64)


def synthesize_pool(spec: SynthesisSpec) -> SourcePool:
    """Clean mixture data split into K corrupted sources plus clean val/test splits."""
    spec.validate()
    corruption = spec.corruption()
    rng = np.random.default_rng(spec.seed)
    total = spec.pool_size + spec.validation_size + spec.test_size
    features, labels = _mixture(spec, total, rng)

    next_id = 0
    sources: List[DataSource] = []
    chunks = np.array_split(np.arange(spec.pool_size), spec.num_sources)
    for index, (rows, recipe) in enumerate(zip(chunks, corruption)):
        clean = labels[rows]
        noisy = flip_labels(clean, recipe.flip_rate, spec.num_classes, rng)
        x = features[rows]
        if recipe.noise_std > 0.0:
            x = x + rng.normal(0.0, recipe.noise_std, size=x.shape)
        samples: List[Sample] = []
        for _ in range(int(recipe.duplication_factor)):
            for row in range(len(rows)):
                samples.append(Sample(next_id, x[row], int(noisy[row]), index, int(clean[row])))
                next_id += 1
        sources.append(DataSource(index, f"source-{index}", samples, recipe))

    def _clean_split(start: int, size: int, split: Split) -> List[Sample]:
        nonlocal next_id
        out = []
        for row in range(start, start + size):
            out.append(Sample(next_id, features[row], int(labels[row]), 0, int(labels[row]), split))
            next_id += 1
        return out

    validation = _clean_split(spec.pool_size, spec.validation_size, Split.VALIDATION)
    test = _clean_split(spec.pool_size + spec.validation_size, spec.test_size, Split.TEST)
    logger.info(
        f"Synthesised {sum(len(s) for s in sources)} training samples across "
        f"{spec.num_sources} sources ({len(validation)} validation, {len(test)} test)"
    )
    return SourcePool(sources, validation, test, spec.num_classes, spec.num_features)


def disagreement_rate(samples: Sequence[Sample]) -> float:
    """Fraction of samples whose label differs from the retained ground truth."""
    labelled = [s for s in samples if s.clean_label is not None]
    if not labelled:
        return 0.0
    return sum(s.is_corrupted for s in labelled) / len(labelled)
