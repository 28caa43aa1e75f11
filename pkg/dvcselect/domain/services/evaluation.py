"""
Final-model training and test-split scoring shared by every method.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from sklearn.metrics import accuracy_score, f1_score

from ..models.network import Activation, LossKind, MlpModel
from ..models.sources import Sample, stack_samples
from .mlp_core import predict_labels, train
from ...shared.exceptions import ConfigurationError


@dataclass(frozen=True)
class FinalTrainingConfig:
    hidden_dims: Tuple[int, ...] = (64, 32)
    activation: Activation = Activation.RELU
    epochs: int = 30
    learning_rate: float = 0.05
    batch_size: int = 32
    seed: int = 0


def ground_truth(samples: Sequence[Sample]) -> np.ndarray:
    """Clean labels where known, observed labels otherwise."""
    return np.array(
        [s.clean_label if s.clean_label is not None else s.label for s in samples],
        dtype=np.int64,
    )


def macro_f1(y_true, y_pred) -> float:
    """Unweighted mean of per-class F1 over every class seen in either vector."""
    labels = np.union1d(np.asarray(y_true), np.asarray(y_pred))
    return float(f1_score(y_true, y_pred, labels=labels, average="macro", zero_division=0))


def train_final_model(
    samples: Sequence[Sample],
    feature_dim: int,
    num_classes: int,
    config: FinalTrainingConfig = FinalTrainingConfig(),
) -> MlpModel:
    """A fresh classifier trained on ``samples`` with the shared recipe."""
    if not samples:
        raise ConfigurationError("cannot train a final model on an empty selection")
    features, labels = stack_samples(samples)
    model = MlpModel.initialize(
        (feature_dim, *config.hidden_dims, num_classes),
        activation=config.activation,
        seed=config.seed,
    )
    return train(model, features, labels, LossKind.cross_entropy(), config.epochs,
                 config.learning_rate, config.batch_size, config.seed)


def evaluate_model(model: MlpModel, test: Sequence[Sample]) -> Tuple[float, float]:
    """(accuracy, macro-F1) against the clean test labels."""
    if not test:
        raise ConfigurationError("the test split is empty")
    features, _ = stack_samples(test)
    truth = ground_truth(test)
    predicted = predict_labels(model, features)
    return float(accuracy_score(truth, predicted)), macro_f1(truth, predicted)
