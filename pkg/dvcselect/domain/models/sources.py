"""
Domain models for multi-source data pools.
"""

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np


def canonical_bytes(x, y) -> bytes:
    """Little-endian serialisation of a (features, target) pair."""
    features = np.ascontiguousarray(np.asarray(x, dtype="<f8"))
    target = np.asarray(y)
    if np.issubdtype(target.dtype, np.integer):
        target_bytes = b"i" + np.ascontiguousarray(target.astype("<i8")).tobytes()
    else:
        target_bytes = b"f" + np.ascontiguousarray(target.astype("<f8")).tobytes()
    return features.tobytes() + b"|" + target_bytes


def sample_digest(x, y) -> str:
    """128-bit hex digest of a sample."""
    return hashlib.sha256(canonical_bytes(x, y)).hexdigest()[:32]


class Split(Enum):
    """Dataset split a sample belongs to."""
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


# =============================================================================
# Value Objects
# =============================================================================

@dataclass(frozen=True)
class CorruptionSpec:
    """How one source deviates from clean data."""
    flip_rate: float = 0.0
    noise_std: float = 0.0
    duplication_factor: int = 1

    def __post_init__(self):
        if not 0.0 <= self.flip_rate <= 1.0:
            raise ValueError(f"flip_rate must lie in [0, 1], got {self.flip_rate}")
        if self.noise_std < 0.0:
            raise ValueError(f"noise_std must be non-negative, got {self.noise_std}")
        if int(self.duplication_factor) != self.duplication_factor or self.duplication_factor < 1:
            raise ValueError(
                f"duplication_factor must be a positive integer, got {self.duplication_factor}"
            )

    def to_dict(self) -> Dict[str, float]:
        return {
            "flip_rate": self.flip_rate,
            "noise_std": self.noise_std,
            "duplication_factor": int(self.duplication_factor),
        }


@dataclass(frozen=True, eq=False)
class Sample:
    """One labelled feature vector. ``clean_label`` is ground truth for evaluation only.

    ``label`` is a class index for classification pools and a float vector for
    regression pools.
    """
    sample_id: int
    features: np.ndarray
    label: Union[int, np.ndarray]
    source: int = 0
    clean_label: Optional[int] = None
    split: Split = Split.TRAIN

    @cached_property
    def digest(self) -> str:
        return sample_digest(self.features, self.label)

    @property
    def is_corrupted(self) -> bool:
        return self.clean_label is not None and bool(np.any(self.clean_label != self.label))


# =============================================================================
# Entities
# =============================================================================

@dataclass
class DataSource:
    """A named training source with its corruption recipe."""
    index: int
    name: str
    samples: List[Sample]
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass
class SourcePool:
    """K training sources plus clean validation and test splits."""
    sources: List[DataSource]
    validation: List[Sample]
    test: List[Sample]
    num_classes: int
    feature_dim: int

    def __post_init__(self):
        if not self.sources:
            raise ValueError("a pool needs at least one source")
        for position, source in enumerate(self.sources):
            if source.index != position:
                raise ValueError(f"source {source.name!r} has index {source.index}, expected {position}")
            for sample in source.samples:
                if sample.source != position:
                    raise ValueError(f"sample {sample.sample_id} is attributed to source {sample.source}, "
                                     f"but listed under source {position}")
        seen = set()
        for sample in self.all_samples():
            if sample.sample_id in seen:
                raise ValueError(f"sample id {sample.sample_id} appears twice")
            seen.add(sample.sample_id)

    @property
    def num_sources(self) -> int:
        return len(self.sources)

    @property
    def train_samples(self) -> List[Sample]:
        return [sample for source in self.sources for sample in source.samples]

    @property
    def train_size(self) -> int:
        return sum(len(source) for source in self.sources)

    def all_samples(self):
        for source in self.sources:
            yield from source.samples
        yield from self.validation
        yield from self.test

    def source_shares(self) -> List[float]:
        total = self.train_size
        return [len(source) / total if total else 0.0 for source in self.sources]

    def by_id(self) -> Dict[int, Sample]:
        return {sample.sample_id: sample for sample in self.train_samples}


def stack_samples(samples: Sequence[Sample]) -> Tuple[np.ndarray, np.ndarray]:
    """Features matrix and label vector of a sample list."""
    if not samples:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    features = np.stack([s.features for s in samples])
    labels = np.array([s.label for s in samples])
    if np.issubdtype(labels.dtype, np.integer):
        labels = labels.astype(np.int64)
    return features, labels
