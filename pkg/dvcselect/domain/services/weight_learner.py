"""
Bayesian optimisation of MetricWeights.

A zero-mean GP with a fixed RBF kernel models validation performance as a
function of the flattened weight vector. The optimisers wrap it in a
ResponseSurface: observations are centred and scaled by their spread, and
once there are enough of them a concave quadratic trend carries the bowl
shape while the GP models what is left. Proposals maximise Expected
Improvement over Dirichlet draws on the product of simplices, local
perturbations of the incumbent and the projected stationary point of the
trend.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.stats import norm

from ..models.network import LossKind, MlpModel
from ..models.selection import BayesOptConfig, ProbeConfig
from ..models.sources import Sample, stack_samples
from ..models.valuation import AblationMask, MetricWeights
from .mlp_core import predict_labels, predict_outputs, train
from ...shared.exceptions import ColdStartError, ConfigurationError, NumericsError
from ...shared.logging import get_logger

logger = get_logger("dvcselect.weights")

# local perturbation scales, as multiples of the base perturbation scale
PERTURBATION_LADDER = (4.0, 2.0, 1.0, 0.5, 0.25, 0.1)

# observed spreads below this are treated as flat
SPREAD_FLOOR = 1e-12


@dataclass(frozen=True)
class WeightProposal:
    """A simplex-valid candidate and its acquisition value."""
    weights: MetricWeights
    expected_improvement: float


@dataclass(frozen=True)
class WeightObservation:
    round_index: int
    weights: MetricWeights
    performance: float

    def to_dict(self) -> dict:
        return {
            "round": self.round_index,
            "weights": self.weights.to_dict(),
            "probe_accuracy": self.performance,
        }


# =============================================================================
# Gaussian-process surrogate
# =============================================================================

class GpSurrogate:
    """Exact GP regression with an RBF kernel and fixed hyperparameters."""

    def __init__(
        self,
        length_scale: float = 0.3,
        signal_variance: float = 1.0,
        jitter: float = 1e-6,
        jitter_escalations: int = 3,
    ):
        self.length_scale = length_scale
        self.signal_variance = signal_variance
        self.jitter = jitter
        self.jitter_escalations = jitter_escalations
        self.effective_jitter = jitter
        self.inputs: Optional[np.ndarray] = None
        self.targets: Optional[np.ndarray] = None
        self._factor = None
        self._alpha: Optional[np.ndarray] = None

    @property
    def fitted(self) -> bool:
        return self._alpha is not None

    def kernel(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        sq = (
            np.sum(a * a, axis=1)[:, None]
            + np.sum(b * b, axis=1)[None, :]
            - 2.0 * a @ b.T
        )
        sq = np.maximum(sq, 0.0)
        return self.signal_variance * np.exp(-sq / (2.0 * self.length_scale ** 2))

    def fit(self, observations: Sequence[Tuple[np.ndarray, float]]) -> 'GpSurrogate':
        if not observations:
            raise ColdStartError("GP needs at least one observation")
        inputs = np.stack([np.asarray(theta, dtype=np.float64) for theta, _ in observations])
        targets = np.array([float(value) for _, value in observations])
        gram = self.kernel(inputs, inputs)

        jitter = self.jitter
        for attempt in range(self.jitter_escalations + 1):
            try:
                factor = cho_factor(gram + jitter * np.eye(len(targets)), lower=True)
                break
            except LinAlgError:
                if attempt == self.jitter_escalations:
                    raise NumericsError(
                        f"Cholesky failed after {self.jitter_escalations} jitter escalations"
                    )
                jitter *= 10.0
                logger.warning(f"Cholesky failed, escalating jitter to {jitter:g}")

        self.effective_jitter = jitter
        self.inputs = inputs
        self.targets = targets
        self._factor = factor
        self._alpha = cho_solve(factor, targets)
        return self

    def predict_many(self, thetas) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior means and variances at every row of ``thetas``."""
        if not self.fitted:
            raise ColdStartError("GP is not fitted")
        queries = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        cross = self.kernel(queries, self.inputs)
        mean = cross @ self._alpha
        lower = np.tril(self._factor[0])
        v = solve_triangular(lower, cross.T, lower=True)
        variance = np.maximum(self.signal_variance - np.sum(v * v, axis=0), 0.0)
        return mean, variance

    def predict(self, theta) -> Tuple[float, float]:
        mean, variance = self.predict_many(np.asarray(theta, dtype=np.float64)[None, :])
        return float(mean[0]), float(variance[0])

    @property
    def best_value(self) -> float:
        if self.targets is None:
            raise ColdStartError("GP is not fitted")
        return float(np.max(self.targets))


def gp_fit(surrogate: GpSurrogate, observations: Sequence[Tuple[np.ndarray, float]]) -> GpSurrogate:
    return surrogate.fit(observations)


def gp_predict(surrogate: GpSurrogate, theta) -> Tuple[float, float]:
    return surrogate.predict(theta)


class ResponseSurface:
    """A trend plus a GP over the scaled residuals, in the units of the targets.

    The trend is the mean target until there are ``dim + 2`` observations.
    From then on ``a + b.theta + c |theta|^2`` is fitted by least squares and
    kept only when it is concave (``c < 0``).
    """

    def __init__(self, gp: GpSurrogate, quadratic_trend: bool = True):
        self.gp = gp
        self.quadratic_trend = quadratic_trend
        self.targets: Optional[np.ndarray] = None
        self._coefficients: Optional[np.ndarray] = None
        self._offset = 0.0
        self._scale = 1.0

    @property
    def fitted(self) -> bool:
        return self.gp.fitted

    @property
    def has_quadratic_trend(self) -> bool:
        return self._coefficients is not None

    @staticmethod
    def _basis(inputs: np.ndarray) -> np.ndarray:
        return np.hstack([
            np.ones((inputs.shape[0], 1)),
            inputs,
            np.sum(inputs * inputs, axis=1, keepdims=True),
        ])

    def _trend(self, inputs: np.ndarray) -> np.ndarray:
        if self._coefficients is None:
            return np.full(inputs.shape[0], self._offset)
        return self._basis(inputs) @ self._coefficients

    def fit(self, observations: Sequence[Tuple[np.ndarray, float]]) -> 'ResponseSurface':
        if not observations:
            raise ColdStartError("response surface needs at least one observation")
        inputs = np.stack([np.asarray(theta, dtype=np.float64) for theta, _ in observations])
        targets = np.array([float(value) for _, value in observations])

        self._offset = float(targets.mean())
        spread = float(targets.std())
        self._scale = spread if spread > SPREAD_FLOOR else 1.0
        self._coefficients = None
        if self.quadratic_trend and len(targets) >= inputs.shape[1] + 2:
            # the simplex constraints make the basis rank deficient; lstsq takes the minimum-norm fit
            coefficients, *_ = np.linalg.lstsq(self._basis(inputs), targets, rcond=None)
            if coefficients[-1] < 0.0:
                self._coefficients = coefficients

        residuals = (targets - self._trend(inputs)) / self._scale
        self.gp.fit(list(zip(inputs, residuals)))
        self.targets = targets
        return self

    def predict_many(self, thetas) -> Tuple[np.ndarray, np.ndarray]:
        queries = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        mean, variance = self.gp.predict_many(queries)
        return self._trend(queries) + self._scale * mean, self._scale ** 2 * variance

    def predict(self, theta) -> Tuple[float, float]:
        mean, variance = self.predict_many(np.asarray(theta, dtype=np.float64)[None, :])
        return float(mean[0]), float(variance[0])

    @property
    def best_value(self) -> float:
        if self.targets is None:
            raise ColdStartError("response surface is not fitted")
        return float(np.max(self.targets))

    def trend_optimum(self) -> Optional[np.ndarray]:
        """Unconstrained maximiser of the quadratic trend, None without one.

        The trend is isotropic, so projecting this point group-wise onto the
        simplices gives the trend's maximiser on the product of simplices.
        """
        if self._coefficients is None:
            return None
        linear = self._coefficients[1:-1]
        curvature = float(self._coefficients[-1])
        return -linear / (2.0 * curvature)


Surrogate = Union[GpSurrogate, ResponseSurface]


# =============================================================================
# Acquisition
# =============================================================================

def _expected_improvement(mean: np.ndarray, std: np.ndarray, best: float) -> np.ndarray:
    improvement = mean - best
    ei = np.maximum(improvement, 0.0)
    positive = std > 0.0
    z = improvement[positive] / std[positive]
    ei[positive] = improvement[positive] * norm.cdf(z) + std[positive] * norm.pdf(z)
    return np.maximum(ei, 0.0)


def expected_improvement(surrogate: Surrogate, theta, best_so_far: float) -> float:
    """EI for maximisation; 0 when there is neither uncertainty nor gain."""
    mean, variance = surrogate.predict(theta)
    return float(_expected_improvement(
        np.array([mean]), np.array([np.sqrt(variance)]), best_so_far
    )[0])


def _dirichlet_candidate(rng: np.random.Generator, num_layers: int) -> np.ndarray:
    return np.concatenate([
        rng.dirichlet(np.ones(num_layers + 1)),
        rng.dirichlet(np.ones(3)),
        rng.dirichlet(np.ones(3)),
    ])


def propose_weights(
    surrogate: Surrogate,
    rng: np.random.Generator,
    incumbent: MetricWeights,
    config: BayesOptConfig = BayesOptConfig(),
    mask: Optional[AblationMask] = None,
) -> WeightProposal:
    """EI arg-max over the incumbent, local perturbations and Dirichlet draws.

    A ResponseSurface with a quadratic trend also contributes the trend's
    maximiser on the simplices. The incumbent is scored first, so it wins
    every tie.
    """
    num_layers = incumbent.num_layers
    base = incumbent.flatten()
    candidates: List[MetricWeights] = [incumbent.masked(mask)]
    if isinstance(surrogate, ResponseSurface):
        optimum = surrogate.trend_optimum()
        if optimum is not None:
            candidates.append(MetricWeights.project(optimum, num_layers).masked(mask))
    for i in range(config.local_perturbations):
        scale = config.perturbation_scale * PERTURBATION_LADDER[i % len(PERTURBATION_LADDER)]
        moved = base + rng.normal(0.0, scale, size=base.shape)
        candidates.append(MetricWeights.project(moved, num_layers).masked(mask))
    for _ in range(config.dirichlet_candidates):
        candidates.append(
            MetricWeights.from_flat(_dirichlet_candidate(rng, num_layers), num_layers).masked(mask)
        )

    matrix = np.stack([c.flatten() for c in candidates])
    mean, variance = surrogate.predict_many(matrix)
    scores = _expected_improvement(mean, np.sqrt(variance), surrogate.best_value)
    best = int(np.argmax(scores))
    return WeightProposal(candidates[best], float(scores[best]))


# =============================================================================
# Performance probe
# =============================================================================

def evaluate_performance(
    weights: MetricWeights,
    selected_subset: Sequence[Sample],
    validation_set: Sequence[Sample],
    output_dim: int,
    probe: ProbeConfig = ProbeConfig(),
    loss: LossKind = LossKind.cross_entropy(),
) -> float:
    """Validation score of a fresh probe trained on the current selection.

    Classifiers report accuracy against the clean labels; regression probes
    report 1 / (1 + validation MSE) so that larger is better in both cases.
    """
    if not selected_subset or not validation_set:
        raise ConfigurationError("performance probe needs a selection and a validation set")
    features, labels = stack_samples(selected_subset)
    val_features, _ = stack_samples(validation_set)
    # validation accuracy is measured against ground truth when it is known
    val_labels = np.array(
        [s.clean_label if s.clean_label is not None else s.label for s in validation_set]
    )
    model = MlpModel.initialize(
        (features.shape[1], *probe.hidden_dims, output_dim),
        activation=probe.activation,
        output_kind=loss.output_kind,
        seed=probe.seed,
    )
    if probe.epochs > 0:
        train(model, features, labels, loss, probe.epochs,
              probe.learning_rate, probe.batch_size, probe.seed)
    if loss.is_classification:
        accuracy = float(np.mean(predict_labels(model, val_features) == val_labels))
    else:
        predicted = predict_outputs(model, val_features)[:, :loss.target_dim(output_dim)]
        error = float(np.mean((predicted - val_labels.reshape(predicted.shape)) ** 2))
        accuracy = 1.0 / (1.0 + error)
    logger.debug(f"Probe score {accuracy:.4f} for weights {weights.to_dict()}")
    return accuracy


# =============================================================================
# Optimisation loops
# =============================================================================

def _response_surface(config: BayesOptConfig) -> ResponseSurface:
    gp = GpSurrogate(
        config.length_scale, config.signal_variance, config.jitter, config.jitter_escalations
    )
    return ResponseSurface(gp, config.quadratic_trend)


class AdaptiveWeightLearner:
    """Keeps the current weights and refits the surrogate every F rounds."""

    def __init__(
        self,
        num_layers: int,
        update_frequency: int = 5,
        config: BayesOptConfig = BayesOptConfig(),
        mask: Optional[AblationMask] = None,
        seed: int = 0,
    ):
        if update_frequency < 1:
            raise ConfigurationError("weight update frequency must be >= 1")
        self.num_layers = num_layers
        self.update_frequency = update_frequency
        self.config = config
        self.mask = mask
        self.rng = np.random.default_rng(seed)
        self.surrogate = _response_surface(config)
        self.weights = MetricWeights.uniform(num_layers).masked(mask)
        self.observations: List[WeightObservation] = []
        self.converged = False

    def should_update(self, round_index: int) -> bool:
        return not self.converged and round_index % self.update_frequency == 0

    @property
    def incumbent(self) -> WeightObservation:
        return max(self.observations, key=lambda o: o.performance)

    def _check_convergence(self) -> bool:
        config = self.config
        if len(self.observations) >= config.max_evaluations:
            return True
        if len(self.observations) <= config.patience:
            return False
        performances = [o.performance for o in self.observations]
        before = max(performances[:-config.patience])
        return max(performances) - before < config.min_improvement

    def record(self, round_index: int, performance: float) -> MetricWeights:
        """Log the current weights' performance and move to the next proposal."""
        self.observations.append(WeightObservation(round_index, self.weights, performance))
        self.surrogate.fit([(o.weights.flatten(), o.performance) for o in self.observations])
        if self._check_convergence():
            self.converged = True
            self.weights = self.incumbent.weights
            logger.info(
                f"Weight search converged after {len(self.observations)} evaluations "
                f"(best probe accuracy {self.incumbent.performance:.4f})"
            )
            return self.weights
        proposal = propose_weights(
            self.surrogate, self.rng, self.incumbent.weights, self.config, self.mask
        )
        self.weights = proposal.weights
        return self.weights


@dataclass
class WeightSearchResult:
    best_weights: MetricWeights
    best_value: float
    trajectory: List[WeightObservation] = field(default_factory=list)


def optimize_weights(
    objective: Callable[[MetricWeights], float],
    num_layers: int,
    evaluations: int,
    config: BayesOptConfig = BayesOptConfig(),
    seed: int = 0,
    mask: Optional[AblationMask] = None,
) -> WeightSearchResult:
    """Standalone BO loop over a black-box objective of the weights.

    The first ``config.initial_points`` evaluations are seeded Dirichlet draws;
    every later one is an EI proposal from the surface refitted on all of them.
    """
    if evaluations < 1 or config.initial_points < 1:
        raise ConfigurationError("weight search needs evaluations >= 1 and initial_points >= 1")
    rng = np.random.default_rng(seed)
    surface = _response_surface(config)
    design = [
        MetricWeights.from_flat(_dirichlet_candidate(rng, num_layers), num_layers).masked(mask)
        for _ in range(min(config.initial_points, evaluations))
    ]
    trajectory: List[WeightObservation] = []
    for step in range(evaluations):
        if step < len(design):
            weights = design[step]
        else:
            surface.fit([(o.weights.flatten(), o.performance) for o in trajectory])
            incumbent = max(trajectory, key=lambda o: o.performance).weights
            weights = propose_weights(surface, rng, incumbent, config, mask).weights
        trajectory.append(WeightObservation(step, weights, float(objective(weights))))
    best = max(trajectory, key=lambda o: o.performance)
    logger.debug(f"Weight search best value {best.performance:.6f} after {evaluations} evaluations")
    return WeightSearchResult(best.weights, best.performance, trajectory)
