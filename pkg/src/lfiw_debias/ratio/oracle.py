import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any
from typing import Protocol
from typing import runtime_checkable

import numpy as np

from ..utils.exceptions import SupportError

logger = logging.getLogger(__name__)

Density = Callable[[Any], Any]


@runtime_checkable
class DensityPair(Protocol):
    """Anything that can evaluate the true and the model density pointwise."""

    def target_density(self, x: Any) -> Any:
        """Density of the true distribution ``p`` at ``x``."""
        ...

    def model_density(self, x: Any) -> Any:
        """Density of the model distribution ``p_theta`` at ``x``."""
        ...


@dataclass(frozen=True, eq=False)
class BayesOptimalClassifier:
    """The classifier ``c*(x) = p(x) / (p(x) + gamma * p_theta(x))``.

    Attributes:
        target_density (Density): Pointwise density of ``p``.
        model_density (Density): Pointwise density of ``p_theta``.
        gamma (float): Odds ratio of the two classes.
    """

    target_density: Density
    model_density: Density
    gamma: float = 1.0

    def _components(self, x: Any) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(self.target_density(x), dtype=float)
        q = np.asarray(self.model_density(x), dtype=float)
        if np.any(p < 0) or np.any(q < 0):
            raise ValueError("Densities must be non-negative")
        violations = (p > 0) & (q == 0)
        if np.any(violations):
            raise SupportError(
                f"The model assigns zero density to {int(np.sum(violations))} point(s) "
                "where the true distribution does not"
            )
        return p, q

    def __call__(self, x: Any) -> Any:
        """Probability that ``x`` came from the true distribution.

        Points outside both supports get probability 0.
        """
        p, q = self._components(x)
        total = p + self.gamma * q
        probability = np.divide(p, total, out=np.zeros_like(total), where=total > 0)
        return float(probability) if probability.ndim == 0 else probability

    def implied_weight(self, x: Any) -> Any:
        """``gamma * c / (1 - c)``, which equals ``p(x) / p_theta(x)`` and does not depend on gamma.

        Both ``c`` and ``1 - c`` are formed from the densities directly so the
        identity holds to rounding error even when ``c`` is close to 1.
        """
        p, q = self._components(x)
        total = p + self.gamma * q
        positive = total > 0
        probability = np.divide(p, total, out=np.zeros_like(total), where=positive)
        complement = np.divide(self.gamma * q, total, out=np.ones_like(total), where=positive)
        weight = self.gamma * probability / complement
        return float(weight) if weight.ndim == 0 else weight


def bayes_optimal_classifier(
    target_density: Density | DensityPair,
    model_density: Density | None = None,
    gamma: float = 1.0,
) -> BayesOptimalClassifier:
    """Build the Bayes-optimal classifier for known densities.

    Args:
        target_density (Density | DensityPair): Density of ``p``, or an object exposing
            ``target_density`` and ``model_density`` methods when ``model_density`` is omitted.
        model_density (Density | None): Density of ``p_theta``.
        gamma (float): Odds ratio.

    Returns:
        BayesOptimalClassifier: Callable returning ``c*(x)``; evaluating it where
        ``p > 0`` and ``p_theta = 0`` raises :class:`SupportError`.

    Raises:
        ValueError: If gamma is not positive.
        TypeError: If only one density is given and it is not a density pair.

    Examples:
        >>> oracle = bayes_optimal_classifier(lambda x: 0.75, lambda x: 0.25, gamma=3.0)
        >>> oracle(0), oracle.implied_weight(0)
        (0.5, 3.0)
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if model_density is None:
        if not isinstance(target_density, DensityPair):
            raise TypeError(
                "Pass either two density functions or an object with "
                "'target_density' and 'model_density' methods"
            )
        pair = target_density
        return BayesOptimalClassifier(pair.target_density, pair.model_density, gamma)
    return BayesOptimalClassifier(target_density, model_density, gamma)  # type: ignore[arg-type]
