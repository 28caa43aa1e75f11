"""
Version-keyed LRU cache of per-sample gradients.

Entries are keyed on a digest of the sample bytes, the model version and the
loss, so any parameter update makes every older entry unreachable. The forward
trace is stored next to the gradients because valuation needs both.
"""

import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from typing import NamedTuple, Tuple

from ..models.network import ForwardTrace, LayerGradients, LossKind, MlpModel, Target
from ..models.sources import canonical_bytes, sample_digest
from .mlp_core import backward, forward
from ...shared.exceptions import ConfigurationError


@dataclass(frozen=True)
class CacheKey:
    """Sample digest plus the model version and loss the entry was computed under."""
    sample_digest: str
    model_version: int
    loss: LossKind


class CacheStats(NamedTuple):
    hits: int
    misses: int
    hit_rate: float
    occupancy: int


class _Entry(NamedTuple):
    raw: bytes
    trace: ForwardTrace
    grads: LayerGradients


class GradCache:
    """Capacity-bounded LRU map from CacheKey to (trace, gradients)."""

    def __init__(self, capacity: int = 4096):
        if capacity < 1:
            raise ConfigurationError(f"cache capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._entries: "OrderedDict[CacheKey, _Entry]" = OrderedDict()
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: CacheKey) -> bool:
        return key in self._entries

    def lookup(
        self, model: MlpModel, x, y: Target, loss: LossKind
    ) -> Tuple[ForwardTrace, LayerGradients]:
        """Trace and gradients of (x, y) under ``model``, computing on a miss."""
        raw = canonical_bytes(x, y)
        key = CacheKey(hashlib.sha256(raw).hexdigest()[:32], model.version, loss)
        entry = self._entries.get(key)
        if entry is not None and entry.raw == raw:
            self._entries.move_to_end(key)
            self.hits += 1
            return entry.trace, entry.grads

        self.misses += 1
        # computed before insertion so a failure never leaves an entry behind
        trace = forward(model, x, y, loss)
        grads = backward(model, trace, y, loss)
        if key in self._entries:
            del self._entries[key]
        elif len(self._entries) >= self.capacity:
            self._entries.popitem(last=False)
        self._entries[key] = _Entry(raw, trace, grads)
        return trace, grads

    def get_or_compute(self, model: MlpModel, x, y: Target, loss: LossKind) -> LayerGradients:
        """Gradients of (x, y) under ``model``; identical to a direct backward call."""
        return self.lookup(model, x, y, loss)[1]

    def stats(self) -> CacheStats:
        total = self.hits + self.misses
        rate = self.hits / total if total else 0.0
        return CacheStats(self.hits, self.misses, rate, len(self._entries))

    def reset(self) -> None:
        """Drop every entry and zero the counters."""
        self._entries.clear()
        self.hits = 0
        self.misses = 0
