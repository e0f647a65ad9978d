"""Feature extractors mapping sample points to the space the metrics are computed in."""

import logging
from dataclasses import dataclass
from dataclasses import field
from typing import Any
from typing import Protocol

import numpy as np

from ..ratio.classifier import ProbClassifier
from ..utils.sampling import as_points
from ..utils.seeding import derive_rng

logger = logging.getLogger(__name__)


class FeatureExtractor(Protocol):
    """Maps points ``(n, d)`` to features ``(n, m)``."""

    def __call__(self, points: Any) -> np.ndarray:
        """Extract features."""
        ...


class IdentityExtractor:
    """Uses the points themselves as features."""

    def __call__(self, points: Any) -> np.ndarray:
        """Return the points as an ``(n, d)`` matrix."""
        return as_points(points)


@dataclass(frozen=True, eq=False)
class RandomProjectionExtractor:
    """A fixed random linear map, drawn once from the ``"projection"`` stream.

    Attributes:
        input_dim (int): Dimension of the points.
        out_dim (int): Dimension of the features.
        seed (int): Root seed.
    """

    input_dim: int
    out_dim: int
    seed: int = 0
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        """Draw the projection matrix with entries ``N(0, 1 / input_dim)``."""
        if self.input_dim < 1 or self.out_dim < 1:
            raise ValueError(
                f"input_dim and out_dim must be positive, got {self.input_dim}, {self.out_dim}"
            )
        rng = derive_rng(self.seed, "projection")
        matrix = rng.normal(0.0, 1.0 / np.sqrt(self.input_dim), size=(self.input_dim, self.out_dim))
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)

    def __call__(self, points: Any) -> np.ndarray:
        """Project the points."""
        return np.asarray(as_points(points) @ self.matrix)


@dataclass(frozen=True, eq=False)
class HiddenLayerExtractor:
    """Hidden-layer activations of a trained MLP classifier.

    Attributes:
        classifier (ProbClassifier): An MLP classifier.
    """

    classifier: ProbClassifier

    def __call__(self, points: Any) -> np.ndarray:
        """Activations of shape ``(n, hidden_units)``."""
        return self.classifier.hidden_activations(as_points(points))
