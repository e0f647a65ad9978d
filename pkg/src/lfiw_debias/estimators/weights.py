import logging
from collections.abc import Callable
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
from typing import Any

import numpy as np

from ..utils.exceptions import ConfigError
from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError
from ..utils.sampling import as_points

logger = logging.getLogger(__name__)

LOW_ESS_FRACTION = 0.1


@dataclass(frozen=True)
class WeightConfig:
    """Selects a member of the importance weighted estimator family.

    ``alpha = 1, beta = 0, self_normalize = False`` is the plain importance weighted
    mean. ``alpha`` flattens the weights towards 1, ``beta`` is a floor applied after
    flattening and ``self_normalize`` divides by the sum of the weights.

    Attributes:
        gamma (float): Odds ratio used to turn classifier outputs into weights.
        alpha (float): Flattening power, ``alpha >= 0``.
        beta (float): Clipping floor, ``beta >= 0``.
        self_normalize (bool): Normalize the weights to sum to one.
    """

    gamma: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    self_normalize: bool = False

    def __post_init__(self) -> None:
        """Check parameter ranges."""
        if not self.gamma > 0 or not np.isfinite(self.gamma):
            raise ConfigError(f"gamma must be positive and finite, got {self.gamma}")
        if not self.alpha >= 0 or not np.isfinite(self.alpha):
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        if not self.beta >= 0 or not np.isfinite(self.beta):
            raise ConfigError(f"beta must be non-negative, got {self.beta}")

    @property
    def label(self) -> str:
        """Short identifier such as ``alpha=1.0,beta=0.0,sn``."""
        suffix = ",sn" if self.self_normalize else ""
        return f"alpha={self.alpha!r},beta={self.beta!r}{suffix}"

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "WeightConfig":
        """Build a config from a dictionary, rejecting unknown keys."""
        unknown = sorted(set(values) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"Unknown weight option(s): {', '.join(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary of the fields."""
        return asdict(self)


def transform_weights(raw: Any, config: WeightConfig) -> np.ndarray:
    """Flatten, clip and optionally normalize raw importance weights, in that order.

    Args:
        raw (Any): Non-negative finite weights.
        config (WeightConfig): Estimator variant.

    Returns:
        np.ndarray: Transformed weights of the same length.

    Raises:
        EmptyDataError: If there are no weights.
        ValueError: If a weight is negative or not finite.
        NumericalError: If normalization is requested but the weights sum to zero.

    Examples:
        >>> transform_weights([2.0, 8.0], WeightConfig(alpha=0.0)).tolist()
        [1.0, 1.0]
        >>> transform_weights([0.5, 1.5], WeightConfig(beta=1.0)).tolist()
        [1.0, 1.5]
        >>> transform_weights([1.0, 3.0], WeightConfig(self_normalize=True)).tolist()
        [0.25, 0.75]
    """
    weights = np.array(raw, dtype=float).ravel()
    if weights.size == 0:
        raise EmptyDataError("Cannot transform an empty weight vector")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ValueError("Raw weights must be finite and non-negative")
    if config.alpha != 1.0:
        weights = np.power(weights, config.alpha)
    if config.beta > 0:
        weights = np.maximum(weights, config.beta)
    if config.self_normalize:
        total = weights.sum()
        if not total > 0:
            raise NumericalError("Cannot self-normalize weights that sum to zero")
        weights = weights / total
    return weights


def effective_sample_size(weights: Any) -> float:
    """``(sum w)^2 / sum w^2``, between 1 and the number of weights.

    Returns 0 when all weights are zero.
    """
    weights = np.asarray(weights, dtype=float)
    squares = float(np.sum(weights**2))
    if squares == 0:
        return 0.0
    return float(weights.sum() ** 2 / squares)


@dataclass(frozen=True, eq=False)
class WeightedBatch:
    """Model samples paired with their importance weights.

    Attributes:
        points (np.ndarray): Samples from the model, ``(T, d)``.
        raw_weights (np.ndarray): Estimated importance weights, ``(T,)``.
        transformed_weights (np.ndarray): Weights after :func:`transform_weights` with ``config``.
        config (WeightConfig): The transformation applied.
    """

    points: np.ndarray
    raw_weights: np.ndarray
    transformed_weights: np.ndarray
    config: WeightConfig

    @classmethod
    def from_raw(cls, points: Any, raw_weights: Any, config: WeightConfig) -> "WeightedBatch":
        """Build a batch and compute its transformed weights.

        Args:
            points (Any): Samples from the model.
            raw_weights (Any): One non-negative weight per sample.
            config (WeightConfig): Estimator variant.

        Returns:
            WeightedBatch: The batch.
        """
        points = as_points(points)
        raw = np.asarray(raw_weights, dtype=float).ravel()
        if len(points) != raw.size:
            raise ValueError(f"Got {len(points)} points but {raw.size} weights")
        return cls(points, raw, transform_weights(raw, config), config)

    def __post_init__(self) -> None:
        """Check that points and weights line up."""
        if len(self.points) == 0:
            raise EmptyDataError("A weighted batch needs at least one point")
        if not len(self.points) == len(self.raw_weights) == len(self.transformed_weights):
            raise ValueError("points, raw_weights and transformed_weights must have equal length")

    def __len__(self) -> int:
        """Batch size ``T``."""
        return len(self.points)


@dataclass(frozen=True)
class EstimateReport:
    """An importance weighted estimate with weight diagnostics.

    Attributes:
        value (float): The estimate.
        stderr (float): Sample standard deviation of the weighted summands over ``sqrt(T)``.
        batch_size (int): ``T``.
        weight_min (float): Smallest transformed weight.
        weight_max (float): Largest transformed weight.
        weight_mean (float): Mean transformed weight.
        effective_sample_size (float): ``(sum w)^2 / sum w^2`` of the transformed weights.
    """

    value: float
    stderr: float
    batch_size: int
    weight_min: float
    weight_max: float
    weight_mean: float
    effective_sample_size: float

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible representation with weight statistics grouped."""
        return {
            "value": self.value,
            "stderr": self.stderr,
            "batch_size": self.batch_size,
            "weight_stats": {
                "min": self.weight_min,
                "max": self.weight_max,
                "mean": self.weight_mean,
                "effective_sample_size": self.effective_sample_size,
            },
        }


def evaluate_statistic(
    f: Callable[[np.ndarray], Any], points: np.ndarray, vectorized: bool | None = None
) -> np.ndarray:
    """Evaluate ``f`` on every row of ``points``.

    ``f`` is either a point statistic, mapping one ``(d,)`` point to a single number, or
    a vectorized statistic, mapping the ``(T, d)`` matrix to ``T`` numbers. A function
    that accepts a single point and returns one number is always applied point by point,
    so ``lambda x: x[0]`` means the first coordinate even when ``d == T``. Pass
    ``vectorized`` to skip the detection.

    Args:
        f (Callable[[np.ndarray], Any]): The statistic.
        points (np.ndarray): ``(T, d)`` sample matrix.
        vectorized (bool | None): Force the vectorized (``True``) or point (``False``)
            calling convention; detected from the first point when ``None``.

    Returns:
        np.ndarray: ``T`` statistic values.

    Raises:
        ValueError: If ``f`` returns the wrong number of values or non-finite values.

    Examples:
        >>> points = np.array([[1.0, 10.0], [3.0, 30.0]])
        >>> evaluate_statistic(lambda x: x[0], points).tolist()
        [1.0, 3.0]
        >>> evaluate_statistic(lambda x: x[:, 1], points).tolist()
        [10.0, 30.0]
    """
    if vectorized is None:
        vectorized = len(points) == 0 or not _is_point_statistic(f, points[0])
    if vectorized:
        values = np.asarray(f(points), dtype=float).ravel()
        if values.size != len(points):
            raise ValueError(
                f"A vectorized statistic must return {len(points)} values, got {values.size}"
            )
    else:
        values = np.array([float(np.asarray(f(point), dtype=float).item()) for point in points])
    if not np.all(np.isfinite(values)):
        raise ValueError("The statistic produced non-finite values")
    return values


def _is_point_statistic(f: Callable[[np.ndarray], Any], point: np.ndarray) -> bool:
    try:
        return bool(np.asarray(f(point), dtype=float).size == 1)
    except (TypeError, ValueError, IndexError):
        return False


def estimate_from_values(
    values: np.ndarray, raw_weights: np.ndarray, config: WeightConfig, warn_low_ess: bool = True
) -> EstimateReport:
    """Importance weighted estimate from precomputed statistic values.

    Args:
        values (np.ndarray): ``f(x_i)`` for each sample.
        raw_weights (np.ndarray): Raw weights of the samples.
        config (WeightConfig): Estimator variant.
        warn_low_ess (bool): Log a warning when the effective sample size is small.

    Returns:
        EstimateReport: The estimate and weight diagnostics.
    """
    weights = transform_weights(raw_weights, config)
    values = np.asarray(values, dtype=float).ravel()
    if values.size != weights.size:
        raise ValueError(f"Got {values.size} values but {weights.size} weights")
    t = weights.size
    # Summands whose plain mean is the estimate in both the normalized and plain forms.
    summands = t * weights * values if config.self_normalize else weights * values
    value = float(np.sum(weights * values)) if config.self_normalize else float(summands.mean())
    stderr = float(summands.std(ddof=1) / np.sqrt(t)) if t > 1 else 0.0
    ess = effective_sample_size(weights)
    if warn_low_ess and ess < LOW_ESS_FRACTION * t:
        logger.warning(
            "Effective sample size %.1f is below %.0f%% of the batch size %d",
            ess,
            100 * LOW_ESS_FRACTION,
            t,
        )
    return EstimateReport(
        value=value,
        stderr=stderr,
        batch_size=t,
        weight_min=float(weights.min()),
        weight_max=float(weights.max()),
        weight_mean=float(weights.mean()),
        effective_sample_size=ess,
    )


def estimate_expectation(
    batch: WeightedBatch, f: Callable[[np.ndarray], Any], config: WeightConfig | None = None
) -> EstimateReport:
    """Estimate ``E_p[f]`` from model samples and importance weights.

    The self-normalized form returns ``sum_i w_i f(x_i)`` with weights summing to one;
    otherwise it returns ``(1 / T) sum_i w_i f(x_i)``.

    Args:
        batch (WeightedBatch): Model samples with raw weights.
        f (Callable[[np.ndarray], Any]): The function whose expectation is estimated.
        config (WeightConfig | None): Estimator variant; the batch's own config when omitted.

    Returns:
        EstimateReport: The estimate with a standard error and weight statistics.

    Examples:
        >>> batch = WeightedBatch.from_raw([[0.0], [4.0]], [1.0, 3.0], WeightConfig(self_normalize=True))
        >>> estimate_expectation(batch, lambda x: x[:, 0]).value
        3.0
    """
    config = batch.config if config is None else config
    values = evaluate_statistic(f, batch.points)
    return estimate_from_values(values, batch.raw_weights, config)


def relative_bias_reduction(truth: float, baseline: float, corrected: float) -> float:
    """Share of the baseline's bias removed by a corrected estimate.

    Args:
        truth (float): True value.
        baseline (float): Uncorrected estimate.
        corrected (float): Importance weighted estimate.

    Returns:
        float: ``1 - |truth - corrected| / |truth - baseline|``; 1 means all bias removed,
        negative values mean the correction made things worse.

    Raises:
        ValueError: If the baseline is exactly unbiased.

    Examples:
        >>> relative_bias_reduction(1.0, 3.0, 1.5)
        0.75
    """
    baseline_error = abs(truth - baseline)
    if baseline_error == 0:
        raise ValueError("The baseline has no bias to reduce")
    return 1.0 - abs(truth - corrected) / baseline_error
