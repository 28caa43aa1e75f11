"""
Domain models for the dense valuation network.

An MlpModel is a plain feed-forward network whose parameters are updated in
place by SGD; every update bumps ``version`` so caches and traces can tell
model states apart.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np


class Activation(Enum):
    """Hidden-layer non-linearity."""
    RELU = "relu"
    TANH = "tanh"


class OutputKind(Enum):
    """How the output layer's raw values are read."""
    SOFTMAX = "softmax"
    IDENTITY = "identity"


class LossType(Enum):
    """Supported training losses."""
    CROSS_ENTROPY = "cross_entropy"
    MEAN_SQUARED_ERROR = "mse"
    GAUSSIAN_NLL = "gaussian_nll"


Target = Union[int, np.integer, Sequence[float], np.ndarray]


# =============================================================================
# Value Objects
# =============================================================================

@dataclass(frozen=True)
class LossKind:
    """A loss function plus its constants."""
    loss_type: LossType
    variance_floor: float = 1e-6

    def __post_init__(self):
        if self.variance_floor <= 0:
            raise ValueError("variance_floor must be positive")

    @classmethod
    def cross_entropy(cls) -> 'LossKind':
        return cls(LossType.CROSS_ENTROPY)

    @classmethod
    def mse(cls) -> 'LossKind':
        return cls(LossType.MEAN_SQUARED_ERROR)

    @classmethod
    def gaussian_nll(cls, variance_floor: float = 1e-6) -> 'LossKind':
        return cls(LossType.GAUSSIAN_NLL, variance_floor)

    @property
    def is_classification(self) -> bool:
        return self.loss_type is LossType.CROSS_ENTROPY

    @property
    def output_kind(self) -> OutputKind:
        return OutputKind.SOFTMAX if self.is_classification else OutputKind.IDENTITY

    def target_dim(self, output_dim: int) -> int:
        """Length of a regression target for a network with ``output_dim`` outputs."""
        if self.loss_type is LossType.GAUSSIAN_NLL:
            return output_dim // 2
        return output_dim


@dataclass(frozen=True)
class ForwardTrace:
    """Activations h_0..h_L and loss of one sample under one model version."""
    activations: Tuple[np.ndarray, ...]
    output_probs: np.ndarray
    loss: float
    model_version: int

    @property
    def num_layers(self) -> int:
        return len(self.activations) - 1

    def layer(self, index: int) -> np.ndarray:
        """Activation vector h_index."""
        return self.activations[index]


@dataclass(frozen=True)
class LayerGradients:
    """Hidden-state and parameter gradients of one sample's loss.

    ``hidden_grads[l]`` is dl/dh_l for l = 0..L-1 and ``output_grad`` is
    dl/dh_L. ``param_grad_flat`` concatenates (W_1, b_1, ..., W_L, b_L) with
    every matrix flattened row-major.
    """
    hidden_grads: Tuple[np.ndarray, ...]
    output_grad: np.ndarray
    param_grad_flat: np.ndarray
    model_version: int

    def layer_grad(self, index: int) -> np.ndarray:
        """dl/dh_index for index in 0..L."""
        if index == len(self.hidden_grads):
            return self.output_grad
        return self.hidden_grads[index]


# =============================================================================
# Entities
# =============================================================================

@dataclass
class MlpModel:
    """Dense feed-forward network with a monotone version counter."""
    layer_dims: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: Activation = Activation.RELU
    output_kind: OutputKind = OutputKind.SOFTMAX
    version: int = 0
    _shapes: List[Tuple[int, int]] = field(default_factory=list, init=False, repr=False)

    def __post_init__(self):
        self.layer_dims = tuple(int(d) for d in self.layer_dims)
        if len(self.layer_dims) < 2:
            raise ValueError("layer_dims needs at least an input and an output size")
        if any(d < 1 for d in self.layer_dims):
            raise ValueError("layer_dims entries must be positive")
        if len(self.weights) != self.num_layers or len(self.biases) != self.num_layers:
            raise ValueError("one weight matrix and one bias per layer required")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_dims[index + 1], self.layer_dims[index])
            if weight.shape != expected:
                raise ValueError(
                    f"layer {index + 1} weight shape {weight.shape} != {expected}"
                )
            if bias.shape != (expected[0],):
                raise ValueError(
                    f"layer {index + 1} bias shape {bias.shape} != ({expected[0]},)"
                )
        if self.version < 0:
            raise ValueError("version must be non-negative")
        self._shapes = [w.shape for w in self.weights]

    @classmethod
    def initialize(
        cls,
        layer_dims: Sequence[int],
        activation: Activation = Activation.RELU,
        output_kind: OutputKind = OutputKind.SOFTMAX,
        seed: int = 0,
    ) -> 'MlpModel':
        """He-style uniform fan-in initialisation with zero biases."""
        rng = np.random.default_rng(seed)
        dims = tuple(int(d) for d in layer_dims)
        weights = []
        biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(dims, weights, biases, activation, output_kind)

    @property
    def num_layers(self) -> int:
        """L, the number of weight layers."""
        return len(self.layer_dims) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def flat_parameters(self) -> np.ndarray:
        """Parameters in the same order as ``LayerGradients.param_grad_flat``."""
        parts = []
        for weight, bias in zip(self.weights, self.biases):
            parts.append(weight.ravel())
            parts.append(bias)
        return np.concatenate(parts)

    def unflatten(self, flat: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
        """Split a flat parameter-shaped vector into per-layer arrays."""
        if flat.shape != (self.parameter_count,):
            raise ValueError(
                f"flat vector has shape {flat.shape}, expected ({self.parameter_count},)"
            )
        weights, biases = [], []
        offset = 0
        for rows, cols in self._shapes:
            weights.append(flat[offset:offset + rows * cols].reshape(rows, cols))
            offset += rows * cols
            biases.append(flat[offset:offset + rows])
            offset += rows
        return weights, biases

    def with_flat_parameters(self, flat: np.ndarray) -> 'MlpModel':
        """A copy carrying ``flat`` as parameters and the same version."""
        weights, biases = self.unflatten(np.asarray(flat, dtype=np.float64))
        return MlpModel(
            self.layer_dims,
            [w.copy() for w in weights],
            [b.copy() for b in biases],
            self.activation,
            self.output_kind,
            self.version,
        )

    def copy(self) -> 'MlpModel':
        return self.with_flat_parameters(self.flat_parameters())
