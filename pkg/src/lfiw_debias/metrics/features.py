import logging
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from scipy.special import softmax

from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError
from ..utils.sampling import as_points

logger = logging.getLogger(__name__)

ROW_SUM_TOLERANCE = 1e-9


def _check_weights(weights: Any, n: int) -> np.ndarray:
    if weights is None:
        return np.ones(n)
    values = np.array(weights, dtype=float).ravel()
    if values.size != n:
        raise ValueError(f"Expected {n} weights, got {values.size}")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ValueError("Weights must be finite and non-negative")
    if not values.sum() > 0:
        raise NumericalError("Weights must not all be zero")
    return values


@dataclass(frozen=True, eq=False)
class FeatureSet:
    """Feature vectors of a sample with optional importance weights.

    Attributes:
        rows (np.ndarray): Features, ``(n, d)``.
        weights (np.ndarray): Non-negative weights, all ones when not given.
    """

    rows: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        """Validate features and weights."""
        rows = as_points(self.rows, "features")
        if len(rows) == 0:
            raise EmptyDataError("A feature set needs at least one row")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "weights", _check_weights(self.weights, len(rows)))

    def __len__(self) -> int:
        """Number of rows."""
        return len(self.rows)

    @property
    def dim(self) -> int:
        """Feature dimension."""
        return int(self.rows.shape[1])

    @property
    def normalized_weights(self) -> np.ndarray:
        """Weights scaled to sum to one."""
        return self.weights / self.weights.sum()

    def with_weights(self, weights: Any) -> "FeatureSet":
        """The same rows with other weights."""
        return FeatureSet(self.rows, weights)

    def mean_and_covariance(self) -> tuple[np.ndarray, np.ndarray]:
        """Weighted mean and covariance, dividing by the total weight.

        With equal weights this is the ordinary mean and the divide-by-``n`` covariance.

        Raises:
            EmptyDataError: If there are fewer than two rows.
        """
        if len(self) < 2:
            raise EmptyDataError("Covariance-based metrics need at least two rows")
        w = self.normalized_weights
        mean = w @ self.rows
        centered = self.rows - mean
        covariance = (centered * w[:, None]).T @ centered
        return mean, covariance


@dataclass(frozen=True, eq=False)
class LabelDistribution:
    """Predicted class probabilities of a sample with optional importance weights.

    Attributes:
        rows (np.ndarray): Row-stochastic matrix ``(n, k)`` with ``k >= 2``.
        weights (np.ndarray): Non-negative weights, all ones when not given.
    """

    rows: np.ndarray
    weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        """Validate the probabilities and weights."""
        rows = as_points(self.rows, "label probabilities")
        if len(rows) == 0:
            raise EmptyDataError("A label distribution needs at least one row")
        if rows.shape[1] < 2:
            raise ValueError(f"Need at least two classes, got {rows.shape[1]}")
        if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=1) - 1.0) > ROW_SUM_TOLERANCE):
            raise ValueError("Each row must be a probability vector")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "weights", _check_weights(self.weights, len(rows)))

    @classmethod
    def from_logits(cls, logits: Any, weights: Any = None) -> "LabelDistribution":
        """Apply a row-wise softmax to unnormalized scores.

        Examples:
            >>> LabelDistribution.from_logits([[0.0, 0.0]]).rows.tolist()
            [[0.5, 0.5]]
        """
        return cls(softmax(as_points(logits, "logits"), axis=1), weights)

    def with_weights(self, weights: Any) -> "LabelDistribution":
        """The same rows with other weights."""
        return LabelDistribution(self.rows, weights)

    @property
    def num_classes(self) -> int:
        """Number of classes ``k``."""
        return int(self.rows.shape[1])

    def marginal(self) -> np.ndarray:
        """Weighted mean of the rows."""
        w = self.weights / self.weights.sum()
        return np.asarray(w @ self.rows)


def load_features(path: str | Path) -> np.ndarray:
    """Read a feature matrix from a CSV file with a header row."""
    features = as_points(pd.read_csv(path).to_numpy(dtype=float), str(path))
    logger.info("Loaded %d feature rows of dimension %d from %s", *features.shape, path)
    return features


def load_weights(path: str | Path) -> np.ndarray:
    """Read weights from the first (or ``weight``) column of a CSV file."""
    frame = pd.read_csv(path)
    column = "weight" if "weight" in frame.columns else frame.columns[0]
    return frame[column].to_numpy(dtype=float)
