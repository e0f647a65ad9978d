import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.stats import norm

from ..ratio.oracle import bayes_optimal_classifier
from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError

logger = logging.getLogger(__name__)

GRID_LOW = -4.0
GRID_HIGH = 4.0
GRID_POINTS = 161


@dataclass(frozen=True, eq=False)
class GaussianMixture1D:
    """A finite mixture of univariate Gaussians.

    Attributes:
        component_means (np.ndarray): Mean of each component.
        component_stds (np.ndarray): Standard deviation of each component.
        mixture_weights (np.ndarray): Component probabilities, summing to one.
    """

    component_means: np.ndarray
    component_stds: np.ndarray
    mixture_weights: np.ndarray

    def __post_init__(self) -> None:
        """Validate the component parameters."""
        means = np.array(self.component_means, dtype=float).ravel()
        stds = np.array(self.component_stds, dtype=float).ravel()
        weights = np.array(self.mixture_weights, dtype=float).ravel()
        if not means.size == stds.size == weights.size or means.size == 0:
            raise ValueError("Means, standard deviations and weights must have equal non-zero length")
        if np.any(stds <= 0):
            raise ValueError("Component standard deviations must be positive")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("Mixture weights must be non-negative and sum to 1")
        for name, values in (
            ("component_means", means),
            ("component_stds", stds),
            ("mixture_weights", weights),
        ):
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    def pdf(self, x: Any) -> np.ndarray:
        """Density at each point of ``x`` (any shape; ``(n, 1)`` matrices are flattened)."""
        values = np.asarray(x, dtype=float)
        if values.ndim == 2 and values.shape[1] == 1:
            values = values[:, 0]
        components = norm.pdf(values[..., None], self.component_means, self.component_stds)
        return np.asarray(components @ self.mixture_weights)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` points as an ``(n, 1)`` matrix."""
        component = rng.choice(self.mixture_weights.size, size=n, p=self.mixture_weights)
        draws = rng.normal(self.component_means[component], self.component_stds[component])
        return draws.reshape(-1, 1)

    @property
    def mean(self) -> float:
        """Mixture mean."""
        return float(self.mixture_weights @ self.component_means)

    @property
    def second_moment(self) -> float:
        """``E[x^2]``."""
        return float(self.mixture_weights @ (self.component_stds**2 + self.component_means**2))

    @property
    def variance(self) -> float:
        """Mixture variance."""
        return self.second_moment - self.mean**2


def fig1_target() -> GaussianMixture1D:
    """The bimodal target ``0.5 N(-1, 0.5^2) + 0.5 N(1, 0.5^2)``.

    Examples:
        >>> fig1_target().variance
        1.25
    """
    return GaussianMixture1D([-1.0, 1.0], [0.5, 0.5], [0.5, 0.5])


def fig1_grid(
    low: float = GRID_LOW, high: float = GRID_HIGH, points: int = GRID_POINTS
) -> np.ndarray:
    """Evenly spaced evaluation grid, ``[-4, 4]`` with 161 points by default."""
    return np.linspace(low, high, points)


@dataclass(frozen=True)
class MomentMatchedGaussian:
    """A univariate Gaussian model.

    Attributes:
        mean (float): Mean.
        std (float): Standard deviation, positive.
    """

    mean: float
    std: float

    def __post_init__(self) -> None:
        """Check the standard deviation."""
        if not self.std > 0 or not np.isfinite(self.std):
            raise ValueError(f"std must be positive and finite, got {self.std}")

    def pdf(self, x: Any) -> np.ndarray:
        """Density at each point of ``x`` (``(n, 1)`` matrices are flattened)."""
        values = np.asarray(x, dtype=float)
        if values.ndim == 2 and values.shape[1] == 1:
            values = values[:, 0]
        return np.asarray(norm.pdf(values, self.mean, self.std))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` points as an ``(n, 1)`` matrix."""
        return rng.normal(self.mean, self.std, size=n).reshape(-1, 1)


def fit_moment_matched(samples: Sequence[float] | np.ndarray) -> MomentMatchedGaussian:
    """Fit a Gaussian by matching the sample mean and the divide-by-``n`` variance.

    Args:
        samples (Sequence[float] | np.ndarray): At least two observations.

    Returns:
        MomentMatchedGaussian: The fitted model.

    Raises:
        EmptyDataError: If there are fewer than two samples.
        NumericalError: If the samples have zero variance.

    Examples:
        >>> fit_moment_matched([-1.0, 1.0])
        MomentMatchedGaussian(mean=0.0, std=1.0)
    """
    values = np.asarray(samples, dtype=float).ravel()
    if values.size < 2:
        raise EmptyDataError(f"Need at least two samples, got {values.size}")
    std = float(values.std(ddof=0))
    if std == 0:
        raise NumericalError("Cannot fit a Gaussian to samples with zero variance")
    return MomentMatchedGaussian(mean=float(values.mean()), std=std)


def analytic_bayes_curve(
    mixture: GaussianMixture1D,
    model: MomentMatchedGaussian,
    gamma: float,
    grid: Sequence[float] | np.ndarray,
) -> np.ndarray:
    """Bayes-optimal probability ``p / (p + gamma p_theta)`` of the true class on a grid.

    Args:
        mixture (GaussianMixture1D): The true distribution.
        model (MomentMatchedGaussian): The model distribution.
        gamma (float): Odds ratio.
        grid (Sequence[float] | np.ndarray): Evaluation points.

    Returns:
        np.ndarray: One probability per grid point.
    """
    oracle = bayes_optimal_classifier(mixture.pdf, model.pdf, gamma)
    return np.asarray(oracle(np.asarray(grid, dtype=float)))
