"""
Streaming reference statistics used by the value metrics.

Layers are addressed as metric layers 1..L (every hidden layer plus the
output layer). Per layer we keep Welford moments of the activations, a ring of
recent activation norms and an EMA of dl/dh_l; globally an EMA of the flat
parameter gradient; per sample a short loss history, for at most
``max_tracked`` samples at a time.
"""

from collections import OrderedDict, deque
from typing import Deque, List, Optional, Tuple

import numpy as np

from ..models.network import ForwardTrace, LayerGradients
from ...shared.exceptions import ColdStartError, ValidationError
from ...shared.logging import get_logger

logger = get_logger("dvcselect.stats")


class WelfordAccumulator:
    """Single-pass mean and variance of a stream of equally shaped arrays."""

    def __init__(self):
        self.count = 0
        self.mean: Optional[np.ndarray] = None
        self.m2: Optional[np.ndarray] = None

    def update(self, value) -> None:
        observation = np.atleast_1d(np.asarray(value, dtype=np.float64))
        self.count += 1
        if self.mean is None:
            self.mean = observation.copy()
            self.m2 = np.zeros_like(observation)
            return
        if observation.shape != self.mean.shape:
            raise ValidationError(
                f"observation shape {observation.shape} != {self.mean.shape}"
            )
        delta = observation - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (observation - self.mean)

    def variance(self) -> np.ndarray:
        """Sample variance M2 / (n - 1); zeros before two observations."""
        if self.mean is None:
            raise ColdStartError("no observations yet")
        if self.count < 2:
            return np.zeros_like(self.mean)
        return np.maximum(self.m2 / (self.count - 1), 0.0)


class LayerStats:
    """Moments, norm ring and bandwidth for one metric layer."""

    def __init__(self, width: int, norm_buffer_size: int = 512):
        self.width = width
        self.moments = WelfordAccumulator()
        self.norm_buffer: Deque[float] = deque(maxlen=norm_buffer_size)

    @property
    def count(self) -> int:
        return self.moments.count

    def observe(self, activation: np.ndarray) -> None:
        self.moments.update(activation)
        self.norm_buffer.append(float(np.linalg.norm(activation)))


class GradientMomentum:
    """EMA of the flat parameter gradient and of every dl/dh_l."""

    def __init__(self, num_layers: int, decay: float = 0.9):
        if not 0.0 < decay < 1.0:
            raise ValidationError(f"momentum decay must lie in (0, 1), got {decay}")
        self.decay = decay
        self.flat_momentum: Optional[np.ndarray] = None
        self.layer_momentum: List[Optional[np.ndarray]] = [None] * num_layers
        self.updates = 0

    @property
    def warm(self) -> bool:
        return self.flat_momentum is not None

    def update(self, flat_grad: np.ndarray, layer_grads: List[np.ndarray]) -> None:
        # the first gradient seeds the average directly
        if self.flat_momentum is None:
            self.flat_momentum = flat_grad.copy()
            self.layer_momentum = [g.copy() for g in layer_grads]
        else:
            keep = self.decay
            self.flat_momentum = keep * self.flat_momentum + (1.0 - keep) * flat_grad
            self.layer_momentum = [
                keep * m + (1.0 - keep) * g
                for m, g in zip(self.layer_momentum, layer_grads)
            ]
        self.updates += 1

    def layer(self, layer: int) -> Optional[np.ndarray]:
        """Momentum of dl/dh_layer for metric layer 1..L."""
        return self.layer_momentum[layer - 1]


class LossHistory:
    """
    Bounded per-sample rings of (model_version, loss).

    At most ``max_tracked`` rings are kept; recording a loss for a new sample
    beyond that evicts the least recently updated ring.
    """

    def __init__(self, window: int = 8, max_tracked: int = 16384):
        if window < 2:
            raise ValidationError("loss window must hold at least two entries")
        if max_tracked < 1:
            raise ValidationError(f"max_tracked must be >= 1, got {max_tracked}")
        self.window = window
        self.max_tracked = max_tracked
        self._rings: "OrderedDict[str, Deque[Tuple[int, float]]]" = OrderedDict()
        self.evictions = 0
        self.running_max_variance = 0.0

    def __len__(self) -> int:
        return len(self._rings)

    def entries(self, sample_digest: str) -> List[Tuple[int, float]]:
        return list(self._rings.get(sample_digest, ()))

    def record_loss(self, sample_digest: str, model_version: int, loss: float) -> None:
        ring = self._rings.get(sample_digest)
        if ring is None:
            if len(self._rings) >= self.max_tracked:
                self._rings.popitem(last=False)
                self.evictions += 1
            ring = self._rings[sample_digest] = deque(maxlen=self.window)
        else:
            self._rings.move_to_end(sample_digest)
        if ring and model_version <= ring[-1][0]:
            if model_version < ring[-1][0]:
                return
            # same model state seen again: keep the latest value
            ring.pop()
        ring.append((model_version, float(loss)))
        variance = self.loss_variance(sample_digest)
        if variance is not None and variance > self.running_max_variance:
            self.running_max_variance = variance

    def loss_variance(self, sample_digest: str) -> Optional[float]:
        """Population variance of the ring, or None with fewer than two entries."""
        ring = self._rings.get(sample_digest)
        if ring is None or len(ring) < 2:
            return None
        return float(np.var([loss for _, loss in ring]))


class OnlineStatistics:
    """All streaming state the metrics read, updated once per observed sample."""

    def __init__(
        self,
        layer_widths: List[int],
        momentum_decay: float = 0.9,
        norm_buffer_size: int = 512,
        loss_window: int = 8,
        loss_history_capacity: int = 16384,
        default_bandwidth: float = 1.0,
        bandwidth_floor: float = 1e-6,
    ):
        self.layers = [LayerStats(width, norm_buffer_size) for width in layer_widths]
        self.momentum = GradientMomentum(len(layer_widths), momentum_decay)
        self.history = LossHistory(loss_window, loss_history_capacity)
        self.default_bandwidth = default_bandwidth
        self.bandwidth_floor = bandwidth_floor
        self.skipped_observations = 0

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def layer(self, layer: int) -> LayerStats:
        if not 1 <= layer <= self.num_layers:
            raise ValidationError(f"metric layer {layer} outside 1..{self.num_layers}")
        return self.layers[layer - 1]

    def update(self, trace: ForwardTrace, grads: LayerGradients) -> bool:
        """Fold one sample into every accumulator; False if it was skipped."""
        activations = trace.activations[1:]
        layer_grads = [grads.layer_grad(l) for l in range(1, self.num_layers + 1)]
        finite = (
            all(np.all(np.isfinite(a)) for a in activations)
            and all(np.all(np.isfinite(g)) for g in layer_grads)
            and np.all(np.isfinite(grads.param_grad_flat))
        )
        if not finite:
            self.skipped_observations += 1
            logger.warning("Skipped non-finite observation "
                           f"(total skipped: {self.skipped_observations})")
            return False
        for stats, activation in zip(self.layers, activations):
            stats.observe(activation)
        self.momentum.update(grads.param_grad_flat, layer_grads)
        return True

    def median_norm(self, layer: int) -> float:
        buffer = self.layer(layer).norm_buffer
        if not buffer:
            raise ColdStartError(f"no activation norms recorded for layer {layer}")
        return float(np.median(np.fromiter(buffer, dtype=np.float64)))

    def bandwidth(self, layer: int) -> float:
        """Kernel bandwidth sqrt(mean variance x width), floored."""
        stats = self.layer(layer)
        if stats.count < 2:
            return self.default_bandwidth
        mean_variance = float(np.mean(stats.moments.variance()))
        return max(float(np.sqrt(mean_variance * stats.width)), self.bandwidth_floor)

    def record_loss(self, sample_digest: str, model_version: int, loss: float) -> None:
        self.history.record_loss(sample_digest, model_version, loss)

    def loss_variance(self, sample_digest: str) -> Optional[float]:
        return self.history.loss_variance(sample_digest)
