"""Data augmentation with generated samples, weighted by importance weights.

The training risk mixes the empirical risk on real labelled data with the risk on
generated labelled data: ``m * risk_real + (1 - m) * risk_generated``. Importance
weights on the generated part down-weight generated pairs that are unlikely under the
true joint distribution of points and labels.
"""

import logging
from collections.abc import Callable
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
from enum import Enum
from typing import Any

import numpy as np
from scipy.special import log_softmax
from scipy.special import softmax
from scipy.stats import multivariate_normal

from ..estimators.weights import WeightConfig
from ..estimators.weights import effective_sample_size
from ..estimators.weights import transform_weights
from ..ratio.classifier import Architecture
from ..ratio.classifier import TrainConfig
from ..ratio.classifier import train_ensemble
from ..ratio.datasets import LabeledRatioDataset
from ..utils.exceptions import ConfigError
from ..utils.exceptions import DimensionMismatchError
from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError
from ..utils.sampling import as_points
from ..utils.seeding import derive_rng

logger = logging.getLogger(__name__)

WeightFn = Callable[[np.ndarray], Any]

CLASS_MEANS = np.array([[-2.0, 0.0], [2.0, 0.0]])


def joint_rows(points: Any, labels: Any) -> np.ndarray:
    """Append the class label as a last column, giving the ``[x, y]`` rows weights act on."""
    points = as_points(points)
    labels = np.asarray(labels, dtype=float).ravel()
    if labels.size != len(points):
        raise ValueError(f"Got {len(points)} points but {labels.size} labels")
    return np.hstack([points, labels[:, None]])


def _labels(values: Any, n_classes: int) -> np.ndarray:
    labels = np.asarray(values)
    integer = np.rint(labels).astype(int).ravel()
    out_of_range = np.any((integer < 0) | (integer >= n_classes))
    if not np.array_equal(integer, labels.ravel()) or out_of_range:
        raise ValueError(f"Labels must be integers in 0..{n_classes - 1}")
    return integer


@dataclass(frozen=True, eq=False)
class AugmentedTask:
    """Real and generated labelled points and the mixing proportion ``m``.

    Attributes:
        real_points (np.ndarray): Real inputs, ``(n_real, d)``.
        real_labels (np.ndarray): Real class labels.
        generated_points (np.ndarray): Generated inputs, ``(n_gen, d)``.
        generated_labels (np.ndarray): Generated class labels.
        mixture_m (float): Weight of the real risk, in ``[0, 1]``.
        n_classes (int): Number of classes.
    """

    real_points: np.ndarray
    real_labels: np.ndarray
    generated_points: np.ndarray
    generated_labels: np.ndarray
    mixture_m: float = 0.5
    n_classes: int = 2

    def __post_init__(self) -> None:
        """Validate shapes, labels and ``m``."""
        if not 0 <= self.mixture_m <= 1:
            raise ConfigError(f"mixture_m must be in [0, 1], got {self.mixture_m}")
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be at least 2, got {self.n_classes}")
        real = np.asarray(self.real_points, dtype=float)
        generated = np.asarray(self.generated_points, dtype=float)
        real = real.reshape(0, generated.shape[-1]) if real.size == 0 else as_points(real)
        generated = (
            generated.reshape(0, real.shape[1]) if generated.size == 0 else as_points(generated)
        )
        if real.shape[1] != generated.shape[1]:
            raise DimensionMismatchError("Real and generated points differ in dimension")
        real_labels = _labels(self.real_labels, self.n_classes)
        generated_labels = _labels(self.generated_labels, self.n_classes)
        if real_labels.size != len(real) or generated_labels.size != len(generated):
            raise ValueError("Each point needs exactly one label")
        if self.mixture_m > 0 and len(real) == 0:
            raise EmptyDataError("The real partition is empty but mixture_m > 0")
        if self.mixture_m < 1 and len(generated) == 0:
            raise EmptyDataError("The generated partition is empty but mixture_m < 1")
        object.__setattr__(self, "real_points", real)
        object.__setattr__(self, "generated_points", generated)
        object.__setattr__(self, "real_labels", real_labels)
        object.__setattr__(self, "generated_labels", generated_labels)

    @property
    def input_dim(self) -> int:
        """Dimension of the inputs."""
        return int(self.real_points.shape[1])

    def with_m(self, mixture_m: float) -> "AugmentedTask":
        """The same data with another mixing proportion."""
        return AugmentedTask(
            self.real_points,
            self.real_labels,
            self.generated_points,
            self.generated_labels,
            mixture_m,
            self.n_classes,
        )

    def generated_joint(self) -> np.ndarray:
        """Generated ``[x, y]`` rows."""
        return joint_rows(self.generated_points, self.generated_labels)

    def real_joint(self) -> np.ndarray:
        """Real ``[x, y]`` rows."""
        return joint_rows(self.real_points, self.real_labels)


@dataclass(frozen=True, eq=False)
class DownstreamClassifier:
    """Multinomial logistic regression ``softmax(x @ coefficients + intercepts)``.

    Attributes:
        coefficients (np.ndarray): ``(d, k)`` weights.
        intercepts (np.ndarray): ``(k,)`` biases.
    """

    coefficients: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self) -> None:
        """Check shapes and finiteness."""
        coefficients = np.array(self.coefficients, dtype=float)
        intercepts = np.array(self.intercepts, dtype=float).ravel()
        if coefficients.ndim != 2 or coefficients.shape[1] != intercepts.size:
            raise ValueError("coefficients must be (d, k) and intercepts (k,)")
        if not np.all(np.isfinite(coefficients)) or not np.all(np.isfinite(intercepts)):
            raise NumericalError("Classifier parameters must be finite")
        object.__setattr__(self, "coefficients", coefficients)
        object.__setattr__(self, "intercepts", intercepts)

    @classmethod
    def zeros(cls, input_dim: int, n_classes: int) -> "DownstreamClassifier":
        """The classifier predicting uniform probabilities."""
        return cls(np.zeros((input_dim, n_classes)), np.zeros(n_classes))

    def logits(self, points: Any) -> np.ndarray:
        """Class scores ``(n, k)``."""
        points = as_points(points)
        if points.shape[1] != self.coefficients.shape[0]:
            raise DimensionMismatchError(
                f"Expected inputs of dimension {self.coefficients.shape[0]}, got {points.shape[1]}"
            )
        return np.asarray(points @ self.coefficients + self.intercepts)

    def predict_proba(self, points: Any) -> np.ndarray:
        """Class probabilities ``(n, k)``."""
        return np.asarray(softmax(self.logits(points), axis=1))

    def predict(self, points: Any) -> np.ndarray:
        """Most probable class per point."""
        return np.asarray(np.argmax(self.logits(points), axis=1))

    def cross_entropy(self, points: Any, labels: Any) -> np.ndarray:
        """Per-example negative log-likelihood."""
        labels = _labels(labels, self.coefficients.shape[1])
        log_probabilities = log_softmax(self.logits(points), axis=1)
        return np.asarray(-log_probabilities[np.arange(len(labels)), labels])

    def accuracy(self, points: Any, labels: Any) -> float:
        """Share of correctly classified points."""
        labels = _labels(labels, self.coefficients.shape[1])
        return float(np.mean(self.predict(points) == labels))


def example_weights(
    task: AugmentedTask, weight_fn: WeightFn | None, config: WeightConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-example risk weights for the real and generated partitions.

    Real points get ``m / n_real``. Generated points get ``(1 - m)`` times their
    transformed importance weights, divided by ``n_gen`` unless the weights are
    self-normalized.

    Returns:
        tuple[np.ndarray, np.ndarray]: Real and generated example weights.
    """
    n_real = len(task.real_points)
    n_gen = len(task.generated_points)
    real = np.full(n_real, task.mixture_m / n_real) if n_real else np.zeros(0)
    if n_gen == 0:
        return real, np.zeros(0)
    if weight_fn is None:
        raw = np.ones(n_gen)
    else:
        raw = np.asarray(weight_fn(task.generated_joint()), dtype=float).ravel()
    transformed = transform_weights(raw, config)
    if not config.self_normalize:
        transformed = transformed / n_gen
    return real, (1.0 - task.mixture_m) * transformed


def weighted_augmented_risk(
    task: AugmentedTask,
    clf: DownstreamClassifier,
    weight_fn: WeightFn | None,
    config: WeightConfig,
) -> float:
    """``m`` times the mean real loss plus ``1 - m`` times the weighted generated loss.

    Args:
        task (AugmentedTask): The labelled data.
        clf (DownstreamClassifier): The classifier being evaluated.
        weight_fn (WeightFn | None): Importance weights of generated ``[x, y]`` rows;
            ``None`` means unit weights.
        config (WeightConfig): Transformation of the raw weights.

    Returns:
        float: The risk under cross-entropy loss.
    """
    real_w, gen_w = example_weights(task, weight_fn, config)
    risk = 0.0
    if real_w.size:
        risk += float(real_w @ clf.cross_entropy(task.real_points, task.real_labels))
    if gen_w.size:
        risk += float(gen_w @ clf.cross_entropy(task.generated_points, task.generated_labels))
    return risk


def train_downstream_classifier(
    task: AugmentedTask,
    weight_fn: WeightFn | None,
    config: WeightConfig,
    epochs: int = 500,
    learning_rate: float = 0.5,
    l2_penalty: float = 1e-4,
) -> DownstreamClassifier:
    """Minimize :func:`weighted_augmented_risk` by full-batch gradient descent from zero.

    Args:
        task (AugmentedTask): The labelled data.
        weight_fn (WeightFn | None): Importance weights of generated rows.
        config (WeightConfig): Transformation of the raw weights.
        epochs (int): Gradient steps.
        learning_rate (float): Step size.
        l2_penalty (float): Weight decay on the coefficients.

    Returns:
        DownstreamClassifier: The fitted classifier.
    """
    if epochs < 1 or not learning_rate > 0 or l2_penalty < 0:
        raise ConfigError("epochs and learning_rate must be positive, l2_penalty non-negative")
    real_w, gen_w = example_weights(task, weight_fn, config)
    points = np.vstack([task.real_points, task.generated_points])
    labels = np.concatenate([task.real_labels, task.generated_labels])
    weights = np.concatenate([real_w, gen_w])
    targets = np.eye(task.n_classes)[labels]

    coefficients = np.zeros((task.input_dim, task.n_classes))
    intercepts = np.zeros(task.n_classes)
    for _ in range(epochs):
        probabilities = softmax(points @ coefficients + intercepts, axis=1)
        residual = (probabilities - targets) * weights[:, None]
        coefficients -= learning_rate * (points.T @ residual + l2_penalty * coefficients)
        intercepts -= learning_rate * residual.sum(axis=0)
    clf = DownstreamClassifier(coefficients, intercepts)
    logger.debug(
        "Downstream classifier trained; risk %.6f",
        weighted_augmented_risk(task, clf, weight_fn, config),
    )
    return clf


def rank_generated_by_weight(generated: Any, weight_fn: WeightFn) -> np.ndarray:
    """Indices of generated rows in decreasing order of importance weight.

    Ties keep their original order.

    Examples:
        >>> rank_generated_by_weight(np.zeros((3, 1)), lambda x: np.array([1.0, 3.0, 2.0])).tolist()
        [1, 2, 0]
    """
    weights = np.asarray(weight_fn(as_points(generated)), dtype=float).ravel()
    return np.argsort(-weights, kind="stable")


@dataclass(frozen=True, eq=False)
class ContaminationOracle:
    """Exact ratio of the true and the generator's joint densities of ``[x1, x2, y]`` rows.

    The true joint puts equal mass on two unit-variance Gaussian classes. The generator
    draws the right class-conditionals but relabels ``flip_fraction`` of class 0 as class 1.
    """

    flip_fraction: float

    def __call__(self, rows: Any) -> np.ndarray:
        """Weights ``p(x, y) / p_theta(x, y)``."""
        rows = as_points(rows)
        points, labels = rows[:, :-1], np.rint(rows[:, -1]).astype(int)
        density_0 = multivariate_normal.pdf(points, CLASS_MEANS[0], np.eye(2))
        density_1 = multivariate_normal.pdf(points, CLASS_MEANS[1], np.eye(2))
        density_0 = np.atleast_1d(density_0)
        density_1 = np.atleast_1d(density_1)
        kept = 1.0 - self.flip_fraction
        weight_0 = np.full(len(rows), 1.0 / kept)
        weight_1 = density_1 / (density_1 + self.flip_fraction * density_0)
        return np.where(labels == 0, weight_0, weight_1)


@dataclass(frozen=True, eq=False)
class ContaminatedToy:
    """A two-class augmentation problem with label-flipped generated points.

    Attributes:
        task (AugmentedTask): Training data.
        test_points (np.ndarray): Clean test inputs.
        test_labels (np.ndarray): Clean test labels.
        flipped (np.ndarray): Mask of generated points whose label was flipped.
        oracle (ContaminationOracle): Exact importance weights of generated rows.
    """

    task: AugmentedTask
    test_points: np.ndarray
    test_labels: np.ndarray
    flipped: np.ndarray
    oracle: ContaminationOracle


def _clean_sample(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    labels = rng.integers(0, 2, size=n)
    points = CLASS_MEANS[labels] + rng.normal(size=(n, 2))
    return points, labels


def make_contaminated_task(
    n_real: int = 50,
    n_generated: int = 500,
    n_test: int = 2000,
    flip_fraction: float = 0.3,
    mixture_m: float = 0.5,
    seed: int = 0,
) -> ContaminatedToy:
    """Build the two-Gaussian augmentation toy with classes centred at ``(-2, 0)`` and ``(2, 0)``.

    Args:
        n_real (int): Real labelled points.
        n_generated (int): Generated labelled points.
        n_test (int): Clean test points.
        flip_fraction (float): Share of generated class-0 points relabelled as class 1.
        mixture_m (float): Weight of the real risk.
        seed (int): Root seed.

    Returns:
        ContaminatedToy: Data, test set, flip mask and oracle weights.
    """
    if not 0 <= flip_fraction < 1:
        raise ConfigError(f"flip_fraction must be in [0, 1), got {flip_fraction}")
    real_points, real_labels = _clean_sample(n_real, derive_rng(seed, "data"))
    test_points, test_labels = _clean_sample(n_test, derive_rng(seed, "data", 1))
    rng = derive_rng(seed, "negatives")
    generated_points, generated_labels = _clean_sample(n_generated, rng)
    flipped = (generated_labels == 0) & (rng.random(n_generated) < flip_fraction)
    generated_labels = np.where(flipped, 1, generated_labels)
    logger.info(
        "Contaminated toy: %d real, %d generated (%d flipped), %d test points",
        n_real,
        n_generated,
        int(flipped.sum()),
        n_test,
    )
    return ContaminatedToy(
        task=AugmentedTask(real_points, real_labels, generated_points, generated_labels, mixture_m),
        test_points=test_points,
        test_labels=test_labels,
        flipped=flipped,
        oracle=ContaminationOracle(flip_fraction),
    )


class WeightScheme(Enum):
    """Source of the weights on generated points."""

    UNIT = "unit"
    LFIW = "lfiw"
    ORACLE = "oracle"


@dataclass(frozen=True)
class AugmentConfig:
    """Settings for :func:`run_augmentation_experiment`.

    Attributes:
        mixture_m (float): Weight of the real risk.
        weights (WeightScheme): Weighting of generated points.
        n_real (int): Real labelled points.
        n_generated (int): Generated labelled points.
        n_test (int): Test points.
        flip_fraction (float): Contamination rate of generated class-0 points.
        seed (int): Root seed.
        self_normalize (bool): Self-normalize the generated weights.
        n_classifiers (int): Ensemble size for learned weights.
        epochs (int): Epochs of the weight classifier.
    """

    mixture_m: float = 0.5
    weights: WeightScheme = WeightScheme.LFIW
    n_real: int = 50
    n_generated: int = 500
    n_test: int = 2000
    flip_fraction: float = 0.3
    seed: int = 0
    self_normalize: bool = True
    n_classifiers: int = 1
    epochs: int = 200

    def __post_init__(self) -> None:
        """Coerce the weight scheme and check ranges."""
        object.__setattr__(self, "weights", WeightScheme(self.weights))
        if not 0 <= self.mixture_m <= 1:
            raise ConfigError(f"mixture_m must be in [0, 1], got {self.mixture_m}")
        if min(self.n_real, self.n_generated, self.n_test, self.n_classifiers, self.epochs) < 1:
            raise ConfigError("Sample sizes, n_classifiers and epochs must be positive")

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "AugmentConfig":
        """Build a config from a dictionary, rejecting unknown keys."""
        unknown = sorted(set(values) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"Unknown augment option(s): {', '.join(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary with the scheme as a string."""
        values = asdict(self)
        values["weights"] = self.weights.value
        return values


@dataclass(frozen=True)
class AugmentResult:
    """Test performance of the downstream classifier.

    Attributes:
        weights (str): Weight scheme used.
        accuracy (float): Test accuracy.
        test_cross_entropy (float): Mean test loss.
        baseline_accuracy (float): Test accuracy with unit weights.
        effective_sample_size (float): Of the generated weights.
        bottom_decile_flipped_share (float): Share of flipped points among the 10% lowest weighted generated points.
    """

    weights: str
    accuracy: float
    test_cross_entropy: float
    baseline_accuracy: float
    effective_sample_size: float
    bottom_decile_flipped_share: float

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary of the fields."""
        return asdict(self)


def learned_augmentation_weights(
    task: AugmentedTask, seed: int, epochs: int = 200, n_classifiers: int = 1
) -> WeightFn:
    """Train a classifier between real and generated ``[x, y]`` rows and return its weights."""
    dataset = LabeledRatioDataset(task.real_joint(), task.generated_joint())
    train = TrainConfig(architecture=Architecture.MLP, hidden_units=32, epochs=epochs, seed=seed)
    return train_ensemble(dataset, train, n_classifiers)


def run_augmentation_experiment(config: AugmentConfig) -> AugmentResult:
    """Train the downstream classifier on the contaminated toy with the chosen weights.

    Args:
        config (AugmentConfig): Experiment settings.

    Returns:
        AugmentResult: Accuracy with the chosen weights and with unit weights.
    """
    toy = make_contaminated_task(
        config.n_real,
        config.n_generated,
        config.n_test,
        config.flip_fraction,
        config.mixture_m,
        config.seed,
    )
    weight_config = WeightConfig(self_normalize=config.self_normalize)
    weight_fn: WeightFn | None
    if config.weights is WeightScheme.ORACLE:
        weight_fn = toy.oracle
    elif config.weights is WeightScheme.LFIW:
        weight_fn = learned_augmentation_weights(
            toy.task, config.seed, config.epochs, config.n_classifiers
        )
    else:
        weight_fn = None

    clf = train_downstream_classifier(toy.task, weight_fn, weight_config)
    baseline = train_downstream_classifier(toy.task, None, weight_config)
    generated = toy.task.generated_joint()
    raw = np.ones(len(generated)) if weight_fn is None else np.asarray(weight_fn(generated))
    order = rank_generated_by_weight(generated, lambda _: raw)
    bottom = order[len(order) - max(1, len(order) // 10) :]
    result = AugmentResult(
        weights=config.weights.value,
        accuracy=clf.accuracy(toy.test_points, toy.test_labels),
        test_cross_entropy=float(np.mean(clf.cross_entropy(toy.test_points, toy.test_labels))),
        baseline_accuracy=baseline.accuracy(toy.test_points, toy.test_labels),
        effective_sample_size=effective_sample_size(transform_weights(raw, weight_config)),
        bottom_decile_flipped_share=float(toy.flipped[bottom].mean()),
    )
    logger.info(
        "Augmentation with %s weights: accuracy %.4f (unit weights %.4f)",
        result.weights,
        result.accuracy,
        result.baseline_accuracy,
    )
    return result
