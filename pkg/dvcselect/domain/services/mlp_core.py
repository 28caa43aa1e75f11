"""
Forward/backward passes, SGD and prediction helpers for MlpModel.

Single-sample ``forward``/``backward`` capture every activation and
hidden-state gradient for valuation. Training goes through the vectorised
batch path, which computes the same mean gradient without per-sample loops.
"""

from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..models.network import (
    Activation,
    ForwardTrace,
    LayerGradients,
    LossKind,
    LossType,
    MlpModel,
    OutputKind,
    Target,
)
from ...shared.exceptions import (
    InputError,
    NumericsError,
    ShapeError,
    StalenessError,
    UnsupportedLossError,
    ValidationError,
)
from ...shared.logging import get_logger

logger = get_logger("dvcselect.mlp")

PROBABILITY_FLOOR = 1e-12


# =============================================================================
# Elementwise helpers
# =============================================================================

def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax over the last axis."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=-1, keepdims=True)


def shannon_entropy(probs: np.ndarray) -> float:
    """Entropy in nats with probabilities clamped to [1e-12, 1] inside the log."""
    p = np.asarray(probs, dtype=np.float64)
    clamped = np.clip(p, PROBABILITY_FLOOR, 1.0)
    return float(max(-np.sum(p * np.log(clamped)), 0.0))


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.TANH:
        return np.tanh(z)
    return np.maximum(z, 0.0)


def _activation_derivative(h: np.ndarray, activation: Activation) -> np.ndarray:
    # expressed through the post-activation value h = act(z)
    if activation is Activation.TANH:
        return 1.0 - h * h
    return (h > 0.0).astype(np.float64)


# =============================================================================
# Input and target validation
# =============================================================================

def _as_input(model: MlpModel, x) -> np.ndarray:
    vector = np.asarray(x, dtype=np.float64)
    if vector.ndim != 1 or vector.shape[0] != model.input_dim:
        raise ShapeError(
            f"input has shape {vector.shape}, expected ({model.input_dim},)"
        )
    if not np.all(np.isfinite(vector)):
        raise InputError("input contains non-finite values")
    return vector


def _as_target(model: MlpModel, y: Target, loss: LossKind):
    if loss.loss_type is LossType.CROSS_ENTROPY:
        if isinstance(y, (np.ndarray, list, tuple)) and np.ndim(y) != 0:
            raise ShapeError("cross-entropy target must be a class index")
        label = int(y)
        if label != y or not 0 <= label < model.output_dim:
            raise InputError(
                f"class index {y} outside [0, {model.output_dim})"
            )
        return label

    target = np.asarray(y, dtype=np.float64)
    if loss.loss_type is LossType.GAUSSIAN_NLL and model.output_dim % 2 != 0:
        raise ShapeError("Gaussian NLL needs an even number of outputs (mean and log-variance)")
    expected = loss.target_dim(model.output_dim)
    if target.ndim != 1 or target.shape[0] != expected:
        raise ShapeError(f"target has shape {target.shape}, expected ({expected},)")
    if not np.all(np.isfinite(target)):
        raise InputError("target contains non-finite values")
    return target


def _as_batch_targets(model: MlpModel, targets, loss: LossKind, count: int) -> np.ndarray:
    if loss.loss_type is LossType.CROSS_ENTROPY:
        labels = np.asarray(targets)
        if labels.shape != (count,):
            raise ShapeError(f"expected {count} class indices, got shape {labels.shape}")
        labels = labels.astype(np.int64)
        if np.any(labels < 0) or np.any(labels >= model.output_dim):
            raise InputError("class index outside the output range")
        return labels
    values = np.asarray(targets, dtype=np.float64)
    expected = (count, loss.target_dim(model.output_dim))
    if values.shape != expected:
        raise ShapeError(f"targets have shape {values.shape}, expected {expected}")
    return values


# =============================================================================
# Loss evaluation
# =============================================================================

def _output_and_loss(z: np.ndarray, y, loss: LossKind) -> Tuple[np.ndarray, float]:
    if loss.loss_type is LossType.CROSS_ENTROPY:
        probs = softmax(z)
        return probs, float(-np.log(max(probs[y], PROBABILITY_FLOOR)))
    if loss.loss_type is LossType.MEAN_SQUARED_ERROR:
        residual = z - y
        return z.copy(), float(0.5 * residual @ residual)
    mean, variance, _ = _gaussian_heads(z, loss)
    residual = y - mean
    value = 0.5 * np.sum(residual * residual / variance + np.log(variance))
    return z.copy(), float(value)


def _gaussian_heads(z: np.ndarray, loss: LossKind):
    half = z.shape[-1] // 2
    mean = z[..., :half]
    raw_variance = np.exp(z[..., half:])
    floored = raw_variance < loss.variance_floor
    variance = np.where(floored, loss.variance_floor, raw_variance)
    return mean, variance, floored


def _output_gradient(z: np.ndarray, y, loss: LossKind) -> np.ndarray:
    """dl/dz at the output layer; works for a single row or a batch of rows."""
    if loss.loss_type is LossType.CROSS_ENTROPY:
        grad = softmax(z)
        if grad.ndim == 1:
            grad[y] -= 1.0
        else:
            grad[np.arange(grad.shape[0]), y] -= 1.0
        return grad
    if loss.loss_type is LossType.MEAN_SQUARED_ERROR:
        return z - y
    mean, variance, floored = _gaussian_heads(z, loss)
    residual = y - mean
    mean_grad = -residual / variance
    log_variance_grad = np.where(floored, 0.0, 0.5 * (1.0 - residual * residual / variance))
    return np.concatenate([mean_grad, log_variance_grad], axis=-1)


# =============================================================================
# Single-sample passes
# =============================================================================

def forward(model: MlpModel, x, y: Target, loss: LossKind) -> ForwardTrace:
    """Run the network on one sample, keeping every activation."""
    h = _as_input(model, x)
    target = _as_target(model, y, loss)
    activations = [h]
    for index, (weight, bias) in enumerate(zip(model.weights, model.biases)):
        z = weight @ h + bias
        h = _activate(z, model.activation) if index < model.num_layers - 1 else z
        activations.append(h)
    output, value = _output_and_loss(h, target, loss)
    return ForwardTrace(tuple(activations), output, value, model.version)


def loss_from_layer(
    model: MlpModel, h: np.ndarray, layer: int, y: Target, loss: LossKind
) -> float:
    """Loss obtained by injecting ``h`` as h_layer and finishing the pass."""
    target = _as_target(model, y, loss)
    current = np.asarray(h, dtype=np.float64)
    for index in range(layer, model.num_layers):
        z = model.weights[index] @ current + model.biases[index]
        current = _activate(z, model.activation) if index < model.num_layers - 1 else z
    return _output_and_loss(current, target, loss)[1]


def backward(
    model: MlpModel, trace: ForwardTrace, y: Target, loss: LossKind
) -> LayerGradients:
    """Analytic gradients of the traced loss."""
    if trace.model_version != model.version:
        raise StalenessError(
            f"trace computed under model version {trace.model_version}, "
            f"model is at version {model.version}"
        )
    target = _as_target(model, y, loss)
    num_layers = model.num_layers
    delta = _output_gradient(trace.activations[-1], target, loss)
    output_grad = delta.copy()

    hidden_grads: List[Optional[np.ndarray]] = [None] * num_layers
    weight_grads: List[Optional[np.ndarray]] = [None] * num_layers
    bias_grads: List[Optional[np.ndarray]] = [None] * num_layers
    for index in reversed(range(num_layers)):
        h_prev = trace.activations[index]
        weight_grads[index] = np.outer(delta, h_prev)
        bias_grads[index] = delta
        grad_h = model.weights[index].T @ delta
        hidden_grads[index] = grad_h
        if index > 0:
            delta = grad_h * _activation_derivative(h_prev, model.activation)

    parts = []
    for weight_grad, bias_grad in zip(weight_grads, bias_grads):
        parts.append(weight_grad.ravel())
        parts.append(bias_grad)
    return LayerGradients(
        hidden_grads=tuple(hidden_grads),
        output_grad=output_grad,
        param_grad_flat=np.concatenate(parts),
        model_version=model.version,
    )


# =============================================================================
# Batched passes
# =============================================================================

def _batch_forward(model: MlpModel, features: np.ndarray) -> List[np.ndarray]:
    activations = [features]
    h = features
    for index, (weight, bias) in enumerate(zip(model.weights, model.biases)):
        z = h @ weight.T + bias
        h = _activate(z, model.activation) if index < model.num_layers - 1 else z
        activations.append(h)
    return activations


def batch_gradient(model: MlpModel, features, targets, loss: LossKind) -> np.ndarray:
    """Mean parameter gradient over a batch, in ``param_grad_flat`` layout."""
    inputs = np.asarray(features, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != model.input_dim:
        raise ShapeError(
            f"batch has shape {inputs.shape}, expected (n, {model.input_dim})"
        )
    if inputs.shape[0] == 0:
        raise ValidationError("batch must be non-empty")
    count = inputs.shape[0]
    labels = _as_batch_targets(model, targets, loss, count)

    activations = _batch_forward(model, inputs)
    delta = _output_gradient(activations[-1], labels, loss) / count
    weight_grads: List[Optional[np.ndarray]] = [None] * model.num_layers
    bias_grads: List[Optional[np.ndarray]] = [None] * model.num_layers
    for index in reversed(range(model.num_layers)):
        h_prev = activations[index]
        weight_grads[index] = delta.T @ h_prev
        bias_grads[index] = delta.sum(axis=0)
        if index > 0:
            delta = (delta @ model.weights[index]) * _activation_derivative(
                h_prev, model.activation
            )

    parts = []
    for weight_grad, bias_grad in zip(weight_grads, bias_grads):
        parts.append(weight_grad.ravel())
        parts.append(bias_grad)
    return np.concatenate(parts)


def sgd_step(
    model: MlpModel, batch: Sequence[Tuple[np.ndarray, Target]], lr: float, loss: LossKind
) -> MlpModel:
    """One plain SGD step on the mean batch gradient; bumps ``version`` by one."""
    if len(batch) == 0:
        raise ValidationError("sgd_step needs a non-empty batch")
    features = np.stack([_as_input(model, x) for x, _ in batch])
    targets = [y for _, y in batch]
    return apply_gradient_step(model, features, targets, lr, loss)


def apply_gradient_step(
    model: MlpModel, features, targets, lr: float, loss: LossKind
) -> MlpModel:
    """Array form of ``sgd_step`` used by the training loops."""
    if lr < 0 or not np.isfinite(lr):
        raise ValidationError(f"learning rate must be a finite non-negative number, got {lr}")
    gradient = batch_gradient(model, features, targets, loss)
    if not np.all(np.isfinite(gradient)):
        raise NumericsError("non-finite gradient; parameters left unchanged")
    weight_steps, bias_steps = model.unflatten(gradient)
    for index in range(model.num_layers):
        model.weights[index] -= lr * weight_steps[index]
        model.biases[index] -= lr * bias_steps[index]
    model.version += 1
    return model


def train(
    model: MlpModel,
    features,
    targets,
    loss: LossKind,
    epochs: int,
    lr: float,
    batch_size: int,
    seed: int,
) -> MlpModel:
    """Shuffled mini-batch SGD for a fixed number of epochs."""
    inputs = np.asarray(features, dtype=np.float64)
    labels = np.asarray(targets)
    if inputs.shape[0] == 0:
        raise ValidationError("cannot train on an empty set")
    rng = np.random.default_rng(seed)
    count = inputs.shape[0]
    for _ in range(epochs):
        order = rng.permutation(count)
        for start in range(0, count, batch_size):
            chosen = order[start:start + batch_size]
            apply_gradient_step(model, inputs[chosen], labels[chosen], lr, loss)
    return model


# =============================================================================
# Prediction
# =============================================================================

def predict_outputs(model: MlpModel, features) -> np.ndarray:
    """Raw outputs, or class probabilities for softmax models, for a batch."""
    inputs = np.asarray(features, dtype=np.float64)
    if inputs.ndim != 2 or inputs.shape[1] != model.input_dim:
        raise ShapeError(f"batch has shape {inputs.shape}, expected (n, {model.input_dim})")
    raw = _batch_forward(model, inputs)[-1]
    if model.output_kind is OutputKind.SOFTMAX:
        return softmax(raw)
    return raw


def predict_labels(model: MlpModel, features) -> np.ndarray:
    """Arg-max class for every row."""
    if model.output_kind is not OutputKind.SOFTMAX:
        raise UnsupportedLossError("class prediction needs a softmax output")
    return np.argmax(predict_outputs(model, features), axis=1)


def batch_entropy(model: MlpModel, features) -> np.ndarray:
    """Prediction entropy of every row in nats."""
    if model.output_kind is not OutputKind.SOFTMAX:
        raise UnsupportedLossError("prediction entropy is defined for classifiers only")
    probs = predict_outputs(model, features)
    clamped = np.clip(probs, PROBABILITY_FLOOR, 1.0)
    return np.maximum(-np.sum(probs * np.log(clamped), axis=1), 0.0)


def predict_entropy(model: MlpModel, x) -> float:
    """Shannon entropy of p(y|x, theta) in nats."""
    if model.output_kind is not OutputKind.SOFTMAX:
        raise UnsupportedLossError("prediction entropy is defined for classifiers only")
    vector = _as_input(model, x)
    return float(batch_entropy(model, vector[None, :])[0])
