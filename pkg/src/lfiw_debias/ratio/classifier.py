import json
import logging
import math
from collections.abc import Sequence
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from scipy.special import expit

from ..utils.exceptions import ConfigError
from ..utils.exceptions import DimensionMismatchError
from ..utils.exceptions import NumericalError
from ..utils.sampling import as_points
from ..utils.seeding import derive_rng
from ..utils.seeding import derive_seed
from .datasets import LabeledRatioDataset

logger = logging.getLogger(__name__)

PROBABILITY_CLAMP = 1e-7
WEIGHT_WARNING_THRESHOLD = 1e3
FORMAT_VERSION = 1


class Architecture(Enum):
    """Supported classifier families."""

    LOGISTIC = "logistic"
    MLP = "mlp"


class Activation(Enum):
    """Hidden-layer nonlinearities for the MLP."""

    TANH = "tanh"
    RELU = "relu"
    SWISH = "swish"


def _activate(activation: Activation, pre: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return the activations and their derivative with respect to ``pre``."""
    if activation is Activation.TANH:
        out = np.tanh(pre)
        return out, 1.0 - out**2
    if activation is Activation.RELU:
        return np.maximum(pre, 0.0), (pre > 0).astype(float)
    sig = expit(pre)
    out = pre * sig
    return out, sig + out * (1.0 - sig)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for :func:`train_classifier`.

    Attributes:
        architecture (Architecture): Logistic regression or one-hidden-layer MLP.
        learning_rate (float): Step size of mini-batch gradient descent.
        epochs (int): Passes over the training data.
        batch_size (int): Mini-batch size.
        seed (int): Root seed for the initialization and shuffling streams.
        hidden_units (int): Width of the MLP hidden layer.
        activation (Activation): MLP hidden nonlinearity.
        l2_penalty (float): Weight decay applied to non-bias parameters.
        momentum (float): Heavy-ball momentum in ``[0, 1)``; 0 disables it.
        validation_fraction (float): Share of each class held out for best-epoch selection; 0 disables it.
    """

    architecture: Architecture = Architecture.MLP
    learning_rate: float = 1e-2
    epochs: int = 200
    batch_size: int = 64
    seed: int = 0
    hidden_units: int = 100
    activation: Activation = Activation.TANH
    l2_penalty: float = 0.0
    momentum: float = 0.9
    validation_fraction: float = 0.0

    def __post_init__(self) -> None:
        """Coerce enum fields given as strings and check ranges."""
        object.__setattr__(self, "architecture", Architecture(self.architecture))
        object.__setattr__(self, "activation", Activation(self.activation))
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden_units < 1:
            raise ConfigError(
                f"epochs, batch_size and hidden_units must be positive, got "
                f"{self.epochs}, {self.batch_size}, {self.hidden_units}"
            )
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.l2_penalty < 0:
            raise ConfigError(f"l2_penalty must be non-negative, got {self.l2_penalty}")
        if not 0 <= self.momentum < 1:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0 <= self.validation_fraction < 1:
            raise ConfigError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "TrainConfig":
        """Build a config from a plain dictionary, rejecting unknown keys.

        Args:
            values (dict[str, Any]): Field values; enums may be given by name.

        Returns:
            TrainConfig: The validated config.

        Raises:
            ConfigError: If a key is not a field of the config.
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"Unknown training option(s): {', '.join(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary with enums replaced by their values."""
        values = asdict(self)
        values["architecture"] = self.architecture.value
        values["activation"] = self.activation.value
        return values


def parameter_count(architecture: Architecture, input_dim: int, hidden_units: int = 0) -> int:
    """Number of entries in the flat parameter vector.

    Args:
        architecture (Architecture): Classifier family.
        input_dim (int): Feature dimension.
        hidden_units (int): MLP width, ignored for logistic regression.

    Returns:
        int: Parameter count.
    """
    if architecture is Architecture.LOGISTIC:
        return input_dim + 1
    return input_dim * hidden_units + 2 * hidden_units + 1


@dataclass(frozen=True, eq=False)
class ProbClassifier:
    """A probabilistic binary classifier ``c(x) = P(y=1 | x)``.

    The parameters are one flat vector. Logistic regression stores ``[w (d), b]``;
    the MLP stores ``[W1 (d*h, row-major), b1 (h), w2 (h), b2]``.

    Attributes:
        architecture (Architecture): Classifier family.
        input_dim (int): Feature dimension.
        weights (np.ndarray): Flat parameter vector, read-only.
        hidden_units (int): MLP width (0 for logistic regression).
        activation (Activation): MLP hidden nonlinearity.
        clamp (float): Probabilities are clipped to ``[clamp, 1 - clamp]``.
        training_loss (float | None): Final training cross-entropy, if trained here.
    """

    architecture: Architecture
    input_dim: int
    weights: np.ndarray
    hidden_units: int = 0
    activation: Activation = Activation.TANH
    clamp: float = PROBABILITY_CLAMP
    training_loss: float | None = field(default=None)

    def __post_init__(self) -> None:
        """Check the parameter vector against the architecture and freeze it."""
        architecture = Architecture(self.architecture)
        activation = Activation(self.activation)
        hidden_units = 0 if architecture is Architecture.LOGISTIC else int(self.hidden_units)
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if architecture is Architecture.MLP and hidden_units < 1:
            raise ValueError("An MLP classifier needs at least one hidden unit")
        weights = np.array(self.weights, dtype=float).ravel()
        expected = parameter_count(architecture, self.input_dim, hidden_units)
        if weights.size != expected:
            raise ValueError(
                f"{architecture.value} classifier with input_dim={self.input_dim} needs "
                f"{expected} parameters, got {weights.size}"
            )
        if not np.all(np.isfinite(weights)):
            raise NumericalError("Classifier parameters must be finite")
        if not 0 < self.clamp < 0.5:
            raise ValueError(f"clamp must be in (0, 0.5), got {self.clamp}")
        weights.setflags(write=False)
        object.__setattr__(self, "architecture", architecture)
        object.__setattr__(self, "activation", activation)
        object.__setattr__(self, "hidden_units", hidden_units)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def logistic(cls, coefficients: Sequence[float], bias: float = 0.0) -> "ProbClassifier":
        """Build a logistic classifier from explicit coefficients.

        Args:
            coefficients (Sequence[float]): One coefficient per feature.
            bias (float): Intercept.

        Returns:
            ProbClassifier: The classifier.

        Examples:
            >>> clf = ProbClassifier.logistic([1.0], 0.0)
            >>> round(float(clf.predict_proba(np.array([math.log(3.0)]))), 12)
            0.75
        """
        coefficients = np.asarray(coefficients, dtype=float).ravel()
        return cls(
            architecture=Architecture.LOGISTIC,
            input_dim=coefficients.size,
            weights=np.concatenate([coefficients, [bias]]),
        )

    def unpack(self) -> tuple[np.ndarray, ...]:
        """Split the flat parameter vector into layer arrays.

        Returns:
            tuple[np.ndarray, ...]: ``(w, b)`` for logistic regression, ``(W1, b1, w2, b2)`` for the MLP.
        """
        return _unpack(self.weights, self.architecture, self.input_dim, self.hidden_units)

    def _as_batch(self, x: Any) -> tuple[np.ndarray, bool]:
        points = np.asarray(x, dtype=float)
        single = points.ndim == 1
        if single:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"Classifier expects points of dimension {self.input_dim}, got shape {np.shape(x)}"
            )
        return points, single

    def logits(self, x: Any) -> np.ndarray:
        """Pre-sigmoid scores for a batch of points ``(n, d)``."""
        points, _ = self._as_batch(x)
        return _forward(self.unpack(), self.architecture, self.activation, points)[0]

    def hidden_activations(self, x: Any) -> np.ndarray:
        """Hidden-layer activations of an MLP, usable as a feature extractor.

        Args:
            x (Any): Points of shape ``(n, d)``.

        Returns:
            np.ndarray: Activations of shape ``(n, hidden_units)``.

        Raises:
            ValueError: If the classifier is a logistic regression.
        """
        if self.architecture is not Architecture.MLP:
            raise ValueError("Only MLP classifiers have a hidden layer")
        points, _ = self._as_batch(x)
        hidden = _forward(self.unpack(), self.architecture, self.activation, points)[1]
        assert hidden is not None  # nosec
        return hidden

    def predict_proba(self, x: Any) -> Any:
        """Clamped probability that each point was drawn from the true distribution.

        Args:
            x (Any): A single point ``(d,)`` or a batch ``(n, d)``.

        Returns:
            float | np.ndarray: A float for a single point, otherwise an array ``(n,)``.
        """
        points, single = self._as_batch(x)
        scores = _forward(self.unpack(), self.architecture, self.activation, points)[0]
        probabilities = np.clip(expit(scores), self.clamp, 1.0 - self.clamp)
        return float(probabilities[0]) if single else probabilities

    def to_dict(self) -> dict[str, Any]:
        """Versioned JSON-compatible representation."""
        return {
            "format_version": FORMAT_VERSION,
            "architecture": self.architecture.value,
            "input_dim": self.input_dim,
            "hidden_units": self.hidden_units,
            "activation": self.activation.value,
            "weights": [float(w) for w in self.weights],
            "clamp": self.clamp,
            "training_loss": self.training_loss,
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "ProbClassifier":
        """Rebuild a classifier from :meth:`to_dict` output.

        Args:
            document (dict[str, Any]): The serialized classifier.

        Returns:
            ProbClassifier: The classifier.

        Raises:
            ValueError: If the format version is not supported.
        """
        version = document.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"Unsupported classifier format version: {version}")
        return cls(
            architecture=Architecture(document["architecture"]),
            input_dim=int(document["input_dim"]),
            weights=np.asarray(document["weights"], dtype=float),
            hidden_units=int(document.get("hidden_units", 0)),
            activation=Activation(document.get("activation", Activation.TANH.value)),
            clamp=float(document.get("clamp", PROBABILITY_CLAMP)),
            training_loss=document.get("training_loss"),
        )

    def save(self, path: str | Path) -> None:
        """Write the classifier as JSON.

        Args:
            path (str | Path): Destination file.
        """
        with open(path, "w", encoding="utf-8") as outfile:
            json.dump(self.to_dict(), outfile, indent=2)

    @classmethod
    def load(cls, path: str | Path) -> "ProbClassifier":
        """Read a classifier written by :meth:`save`.

        Args:
            path (str | Path): Source file.

        Returns:
            ProbClassifier: The classifier.
        """
        with open(path, encoding="utf-8") as infile:
            return cls.from_dict(json.load(infile))


def _unpack(
    weights: np.ndarray, architecture: Architecture, input_dim: int, hidden_units: int
) -> tuple[np.ndarray, ...]:
    if architecture is Architecture.LOGISTIC:
        return weights[:input_dim], weights[input_dim:]
    h = hidden_units
    end_w1 = input_dim * h
    w1 = weights[:end_w1].reshape(input_dim, h)
    b1 = weights[end_w1 : end_w1 + h]
    w2 = weights[end_w1 + h : end_w1 + 2 * h]
    b2 = weights[end_w1 + 2 * h :]
    return w1, b1, w2, b2


def _forward(
    layers: tuple[np.ndarray, ...],
    architecture: Architecture,
    activation: Activation,
    points: np.ndarray,
) -> tuple[np.ndarray, np.ndarray | None, np.ndarray | None]:
    """Return logits, hidden activations and activation derivatives."""
    if architecture is Architecture.LOGISTIC:
        w, b = layers
        return points @ w + b[0], None, None
    w1, b1, w2, b2 = layers
    hidden, derivative = _activate(activation, points @ w1 + b1)
    return hidden @ w2 + b2[0], hidden, derivative


def _loss_and_gradient(
    params: np.ndarray,
    architecture: Architecture,
    activation: Activation,
    input_dim: int,
    hidden_units: int,
    points: np.ndarray,
    labels: np.ndarray,
) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on logits and its gradient with respect to ``params``."""
    layers = _unpack(params, architecture, input_dim, hidden_units)
    scores, hidden, derivative = _forward(layers, architecture, activation, points)
    loss = float(np.mean(np.logaddexp(0.0, scores) - labels * scores))
    delta = (expit(scores) - labels) / len(labels)
    if architecture is Architecture.LOGISTIC:
        return loss, np.concatenate([points.T @ delta, [delta.sum()]])
    assert hidden is not None and derivative is not None  # nosec
    w2 = layers[2]
    grad_w2 = hidden.T @ delta
    grad_b2 = delta.sum()
    back = np.outer(delta, w2) * derivative
    grad_w1 = points.T @ back
    grad_b1 = back.sum(axis=0)
    return loss, np.concatenate([grad_w1.ravel(), grad_b1, grad_w2, [grad_b2]])


def _dataset_loss(
    params: np.ndarray, config: TrainConfig, input_dim: int, points: np.ndarray, labels: np.ndarray
) -> float:
    layers = _unpack(params, config.architecture, input_dim, config.hidden_units)
    scores = _forward(layers, config.architecture, config.activation, points)[0]
    return float(np.mean(np.logaddexp(0.0, scores) - labels * scores))


def _initial_parameters(config: TrainConfig, input_dim: int) -> np.ndarray:
    rng = derive_rng(config.seed, "init")
    if config.architecture is Architecture.LOGISTIC:
        bound = 1.0 / math.sqrt(input_dim)
        return rng.uniform(-bound, bound, size=input_dim + 1)
    h = config.hidden_units
    first_bound = 1.0 / math.sqrt(input_dim)
    second_bound = 1.0 / math.sqrt(h)
    first = rng.uniform(-first_bound, first_bound, size=input_dim * h + h)
    second = rng.uniform(-second_bound, second_bound, size=h + 1)
    return np.concatenate([first, second])


def _decay_mask(config: TrainConfig, input_dim: int) -> np.ndarray:
    """1 for weights subject to L2 decay, 0 for biases."""
    if config.architecture is Architecture.LOGISTIC:
        return np.concatenate([np.ones(input_dim), [0.0]])
    h = config.hidden_units
    return np.concatenate([np.ones(input_dim * h), np.zeros(h), np.ones(h), [0.0]])


def train_classifier(dataset: LabeledRatioDataset, config: TrainConfig) -> ProbClassifier:
    """Fit a classifier separating true samples (label 1) from model samples (label 0).

    Minimizes mean binary cross-entropy with mini-batch gradient descent and optional
    momentum. Initialization and shuffling use streams derived from ``config.seed``,
    so identical inputs give bitwise-identical parameters.

    Args:
        dataset (LabeledRatioDataset): Labelled training points.
        config (TrainConfig): Optimizer and architecture settings.

    Returns:
        ProbClassifier: The trained classifier, with ``training_loss`` set.

    Raises:
        NumericalError: If the loss becomes non-finite, usually a sign of a too large learning rate.
    """
    input_dim = dataset.input_dim
    if config.validation_fraction > 0:
        train_set, validation_set = dataset.split(
            config.validation_fraction, derive_rng(config.seed, "split")
        )
    else:
        train_set, validation_set = dataset, None
    points, labels = train_set.features_and_labels()
    if validation_set is not None:
        validation_points, validation_labels = validation_set.features_and_labels()

    params = _initial_parameters(config, input_dim)
    velocity = np.zeros_like(params)
    decay = config.l2_penalty * _decay_mask(config, input_dim)
    shuffle_rng = derive_rng(config.seed, "shuffle")
    n = len(labels)
    hidden_units = config.hidden_units if config.architecture is Architecture.MLP else 0

    initial_loss = _dataset_loss(params, config, input_dim, points, labels)
    best_params, best_validation = params.copy(), math.inf
    log_every = max(1, config.epochs // 10)
    logger.info(
        "Training %s classifier on %d points (dim %d) for %d epochs",
        config.architecture.value,
        n,
        input_dim,
        config.epochs,
    )
    loss = initial_loss
    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            _, gradient = _loss_and_gradient(
                params,
                config.architecture,
                config.activation,
                input_dim,
                hidden_units,
                points[batch],
                labels[batch],
            )
            gradient = gradient + decay * params
            velocity = config.momentum * velocity - config.learning_rate * gradient
            params = params + velocity

        loss = _dataset_loss(params, config, input_dim, points, labels)
        if not math.isfinite(loss) or not np.all(np.isfinite(params)):
            raise NumericalError(
                f"Training loss became non-finite at epoch {epoch + 1}; "
                f"learning_rate={config.learning_rate} is probably too large"
            )
        if validation_set is not None:
            validation_loss = _dataset_loss(
                params, config, input_dim, validation_points, validation_labels
            )
            if validation_loss < best_validation:
                best_validation, best_params = validation_loss, params.copy()
        if (epoch + 1) % log_every == 0:
            logger.debug("epoch %d/%d loss %.6f", epoch + 1, config.epochs, loss)

    if validation_set is not None:
        params = best_params
        loss = _dataset_loss(params, config, input_dim, points, labels)
        logger.info("Selected parameters with validation loss %.6f", best_validation)
    if loss > initial_loss:
        logger.warning(
            "Training loss increased from %.6f to %.6f; the classifier may not have converged",
            initial_loss,
            loss,
        )
    logger.info("Finished training, final loss %.6f", loss)
    return ProbClassifier(
        architecture=config.architecture,
        input_dim=input_dim,
        weights=params,
        hidden_units=hidden_units,
        activation=config.activation,
        training_loss=loss,
    )


def predict_proba(clf: ProbClassifier, x: Any) -> Any:
    """Probability that ``x`` was drawn from the true distribution; see :meth:`ProbClassifier.predict_proba`."""
    return clf.predict_proba(x)


def importance_weight(clf: ProbClassifier, gamma: float, x: Any) -> Any:
    """Classifier-implied likelihood ratio ``gamma * c(x) / (1 - c(x))``.

    Args:
        clf (ProbClassifier): Trained classifier.
        gamma (float): Odds ratio of the training classes.
        x (Any): A single point ``(d,)`` or a batch ``(n, d)``.

    Returns:
        float | np.ndarray: Non-negative finite weight(s).

    Raises:
        ValueError: If gamma is not positive.

    Examples:
        >>> clf = ProbClassifier.logistic([0.0], math.log(4.0))
        >>> round(importance_weight(clf, 1.0, np.array([0.0])), 9)
        4.0
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    probability = clf.predict_proba(x)
    return gamma * probability / (1.0 - probability)


def importance_weights(
    clf: ProbClassifier,
    gamma: float,
    points: Any,
    warn_above: float = WEIGHT_WARNING_THRESHOLD,
) -> np.ndarray:
    """Batch form of :func:`importance_weight` that warns about suspiciously large weights.

    Large weights usually mean the model distribution misses part of the true support.

    Args:
        clf (ProbClassifier): Trained classifier.
        gamma (float): Odds ratio.
        points (Any): Points of shape ``(n, d)``.
        warn_above (float): Threshold for the warning.

    Returns:
        np.ndarray: Weights of shape ``(n,)``.
    """
    weights = np.atleast_1d(importance_weight(clf, gamma, as_points(points)))
    if weights.size and weights.max() > warn_above:
        logger.warning(
            "%d of %d importance weights exceed %g (max %.4g); the model may not cover the data support",
            int(np.sum(weights > warn_above)),
            weights.size,
            warn_above,
            weights.max(),
        )
    return weights


def log_importance_weights(clf: ProbClassifier, gamma: float, points: Any) -> np.ndarray:
    """Natural log of the importance weights, ``log gamma + logit(c(x))``.

    Uses the clamped probabilities so the result matches ``log(importance_weights(...))``
    without overflowing for confident classifiers.

    Args:
        clf (ProbClassifier): Trained classifier.
        gamma (float): Odds ratio.
        points (Any): Points of shape ``(n, d)``.

    Returns:
        np.ndarray: Log weights of shape ``(n,)``.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    probability = np.atleast_1d(clf.predict_proba(as_points(points)))
    return math.log(gamma) + np.log(probability) - np.log1p(-probability)


@dataclass(frozen=True, eq=False)
class ClassifierEnsemble:
    """Importance weights from one classifier or the average of an ensemble.

    Instances are callables mapping points ``(n, d)`` to weights ``(n,)`` and can be
    passed anywhere a ``weight_fn`` is expected.

    Attributes:
        classifiers (tuple[ProbClassifier, ...]): One or more trained classifiers.
        gamma (float): Odds ratio used during training.
        warn_above (float): Threshold for the large-weight warning.
    """

    classifiers: tuple[ProbClassifier, ...]
    gamma: float = 1.0
    warn_above: float = WEIGHT_WARNING_THRESHOLD

    def __post_init__(self) -> None:
        """Check that the ensemble is non-empty and consistent."""
        members = tuple(self.classifiers)
        if not members:
            raise ValueError("A weight function needs at least one classifier")
        if len({clf.input_dim for clf in members}) != 1:
            raise DimensionMismatchError("All ensemble members must share input_dim")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "classifiers", members)

    @property
    def input_dim(self) -> int:
        """Feature dimension expected by the classifiers."""
        return self.classifiers[0].input_dim

    def __call__(self, points: Any) -> np.ndarray:
        """Mean importance weight over the ensemble members."""
        stacked = np.stack(
            [
                np.atleast_1d(importance_weight(clf, self.gamma, as_points(points)))
                for clf in self.classifiers
            ]
        )
        weights = stacked.mean(axis=0)
        if weights.size and weights.max() > self.warn_above:
            logger.warning(
                "%d of %d importance weights exceed %g (max %.4g)",
                int(np.sum(weights > self.warn_above)),
                weights.size,
                self.warn_above,
                weights.max(),
            )
        return weights

    def log_weights(self, points: Any) -> np.ndarray:
        """Natural log of :meth:`__call__`, computed from logits for a single classifier."""
        if len(self.classifiers) == 1:
            return log_importance_weights(self.classifiers[0], self.gamma, points)
        return np.log(self(points))

    def predict_proba(self, points: Any) -> np.ndarray:
        """Mean member probability for a batch of points."""
        batch = as_points(points)
        return np.mean([np.atleast_1d(clf.predict_proba(batch)) for clf in self.classifiers], axis=0)

    def to_dict(self) -> dict[str, Any]:
        """Versioned JSON-compatible representation."""
        return {
            "format_version": FORMAT_VERSION,
            "gamma": self.gamma,
            "classifiers": [clf.to_dict() for clf in self.classifiers],
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "ClassifierEnsemble":
        """Rebuild an ensemble from :meth:`to_dict` output or a single classifier document."""
        if "classifiers" not in document:
            return cls(classifiers=(ProbClassifier.from_dict(document),))
        version = document.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"Unsupported classifier format version: {version}")
        return cls(
            classifiers=tuple(ProbClassifier.from_dict(d) for d in document["classifiers"]),
            gamma=float(document.get("gamma", 1.0)),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ClassifierEnsemble":
        """Read an ensemble, or a single classifier, from a JSON file."""
        with open(path, encoding="utf-8") as infile:
            return cls.from_dict(json.load(infile))


def train_ensemble(
    dataset: LabeledRatioDataset, config: TrainConfig, n_classifiers: int = 1
) -> ClassifierEnsemble:
    """Train one or more classifiers with different seeds and wrap them as a weight function.

    Member ``k`` is trained with a seed derived from ``config.seed`` and ``k``; a single
    member uses ``config`` unchanged.

    Args:
        dataset (LabeledRatioDataset): Labelled training points.
        config (TrainConfig): Training settings.
        n_classifiers (int): Ensemble size.

    Returns:
        ClassifierEnsemble: Averaged importance weights with the dataset's gamma.
    """
    if n_classifiers < 1:
        raise ConfigError(f"n_classifiers must be positive, got {n_classifiers}")
    if n_classifiers == 1:
        members = [train_classifier(dataset, config)]
    else:
        members = []
        for k in range(n_classifiers):
            member_seed = derive_seed(config.seed, "ensemble", k)
            member_config = TrainConfig.from_dict({**config.to_dict(), "seed": member_seed})
            members.append(train_classifier(dataset, member_config))
    return ClassifierEnsemble(classifiers=tuple(members), gamma=dataset.gamma)
