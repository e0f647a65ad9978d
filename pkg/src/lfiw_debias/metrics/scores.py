"""Sample quality metrics computed on features, with optional importance weights.

Weights on either set turn every expectation into a self-normalized weighted average,
which is how the importance weighted variants of the metrics are formed.
"""

import logging
from collections.abc import Callable
from dataclasses import asdict
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.linalg import eigh
from scipy.spatial.distance import cdist
from scipy.special import xlogy

from ..estimators.weights import WeightConfig
from ..estimators.weights import effective_sample_size
from ..estimators.weights import transform_weights
from ..utils.exceptions import DimensionMismatchError
from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError
from .features import FeatureSet
from .features import LabelDistribution

logger = logging.getLogger(__name__)


def inception_style_score(preds: LabelDistribution) -> float:
    """``exp`` of the weighted mean KL divergence between each row and the marginal.

    Args:
        preds (LabelDistribution): Class probabilities per sample.

    Returns:
        float: A score between 1 and the number of classes.

    Examples:
        >>> round(inception_style_score(LabelDistribution(np.eye(3))), 12)
        3.0
    """
    marginal = preds.marginal()
    if np.any((preds.rows > 0) & (marginal == 0)):
        raise NumericalError("A row puts mass on a class with zero marginal probability")
    ratio = np.divide(
        preds.rows, marginal, out=np.ones_like(preds.rows), where=marginal > 0
    )
    kl_per_row = xlogy(preds.rows, ratio).sum(axis=1)
    w = preds.weights / preds.weights.sum()
    score = float(np.exp(w @ kl_per_row))
    return float(np.clip(score, 1.0, preds.num_classes))


def _check_pair(s: FeatureSet, r: FeatureSet) -> None:
    if s.dim != r.dim:
        raise DimensionMismatchError(f"Feature dimensions differ: {s.dim} and {r.dim}")


def trace_sqrt_product(sigma_s: np.ndarray, sigma_r: np.ndarray) -> float:
    """``Tr sqrt(sigma_s @ sigma_r)`` for symmetric positive semi-definite matrices.

    Computed as the sum of square roots of the eigenvalues of the symmetric matrix
    ``sigma_s^(1/2) @ sigma_r @ sigma_s^(1/2)``, which has the same spectrum.
    Small negative eigenvalues from rounding are clipped to zero.
    """
    values, vectors = eigh(sigma_s)
    root_s = (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T
    middle = root_s @ sigma_r @ root_s
    middle = (middle + middle.T) / 2.0
    eigenvalues = eigh(middle, eigvals_only=True)
    return float(np.sum(np.sqrt(np.clip(eigenvalues, 0.0, None))))


def frechet_distance(s: FeatureSet, r: FeatureSet) -> float:
    """Fréchet distance between Gaussians fitted to two feature sets.

    ``|mu_s - mu_r|^2 + Tr(sigma_s + sigma_r - 2 sqrt(sigma_s sigma_r))`` with weighted
    moments when the sets carry weights.

    Args:
        s (FeatureSet): First set, at least two rows.
        r (FeatureSet): Second set, at least two rows.

    Returns:
        float: A non-negative distance.

    Raises:
        DimensionMismatchError: If the feature dimensions differ.
    """
    _check_pair(s, r)
    mu_s, sigma_s = s.mean_and_covariance()
    mu_r, sigma_r = r.mean_and_covariance()
    diff = mu_s - mu_r
    value = (
        float(diff @ diff)
        + float(np.trace(sigma_s) + np.trace(sigma_r))
        - 2.0 * trace_sqrt_product(sigma_s, sigma_r)
    )
    return max(value, 0.0)


def rbf_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float = 1.0) -> np.ndarray:
    """Gaussian kernel matrix ``exp(-|a_i - b_j|^2 / (2 bandwidth^2))``."""
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * bandwidth**2))


def _within_term(points: np.ndarray, w: np.ndarray, bandwidth: float) -> float:
    kernel = rbf_kernel(points, points, bandwidth)
    outer = np.outer(w, w)
    np.fill_diagonal(outer, 0.0)
    mass = outer.sum()
    if not mass > 0:
        raise NumericalError("The weights leave no off-diagonal pairs")
    return float(np.sum(outer * kernel) / mass)


def kernel_distance(s: FeatureSet, r: FeatureSet, bandwidth: float = 1.0) -> float:
    """Unbiased squared maximum mean discrepancy with a Gaussian kernel.

    The within-set terms average over distinct pairs only; the cross term averages over
    all pairs. Weights enter as products of self-normalized weights, so equal weights
    give the ordinary U-statistic. The value can be slightly negative.

    Args:
        s (FeatureSet): First set, at least two rows.
        r (FeatureSet): Second set, at least two rows.
        bandwidth (float): Kernel bandwidth.

    Returns:
        float: The estimate.
    """
    _check_pair(s, r)
    if not bandwidth > 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    if len(s) < 2 or len(r) < 2:
        raise EmptyDataError("Kernel distances need at least two rows per set")
    w_s = s.normalized_weights
    w_r = r.normalized_weights
    cross = float(w_s @ rbf_kernel(s.rows, r.rows, bandwidth) @ w_r)
    return (
        _within_term(s.rows, w_s, bandwidth)
        + _within_term(r.rows, w_r, bandwidth)
        - 2.0 * cross
    )


@dataclass(frozen=True)
class MetricSuite:
    """Raw and importance weighted sample quality metrics.

    Attributes:
        is_raw (float): Score of the model's label distribution.
        is_lfiw (float): Same with importance weights on the model side.
        fid_raw (float): Fréchet distance between model and real features.
        fid_lfiw (float): Same with importance weights on the model side.
        kid_raw (float): Kernel distance between model and real features.
        kid_lfiw (float): Same with importance weights on the model side.
        effective_sample_size (float): Of the transformed model weights.
    """

    is_raw: float
    is_lfiw: float
    fid_raw: float
    fid_lfiw: float
    kid_raw: float
    kid_lfiw: float
    effective_sample_size: float

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary of the metrics."""
        return asdict(self)


def debiased_metric_suite(
    model_features: FeatureSet,
    real_features: FeatureSet,
    weight_fn: Callable[[np.ndarray], Any] | None,
    config: WeightConfig,
    model_labels: LabelDistribution | None = None,
    model_points: Any = None,
    bandwidth: float = 1.0,
) -> MetricSuite:
    """Compute every metric with and without importance weights on the model sample.

    The real sample is always unit weighted.

    Args:
        model_features (FeatureSet): Features of model samples; its weights are ignored.
        real_features (FeatureSet): Features of real samples; its weights are ignored.
        weight_fn (Callable[[np.ndarray], Any] | None): Raw importance weights of the model
            points; ``None`` means unit weights.
        config (WeightConfig): Transformation applied to the raw weights.
        model_labels (LabelDistribution | None): Class probabilities of the model samples;
            a softmax of the model features when omitted.
        model_points (Any): Inputs of ``weight_fn``; the model features when omitted.
        bandwidth (float): Kernel distance bandwidth.

    Returns:
        MetricSuite: All six values and the effective sample size of the weights.
    """
    model = model_features.with_weights(None)
    real = real_features.with_weights(None)
    labels = (
        LabelDistribution.from_logits(model.rows)
        if model_labels is None
        else model_labels.with_weights(None)
    )
    if len(labels.rows) != len(model):
        raise ValueError("model_labels must have one row per model sample")
    if weight_fn is None:
        raw = np.ones(len(model))
    else:
        inputs = model.rows if model_points is None else model_points
        raw = np.asarray(weight_fn(inputs), dtype=float).ravel()
    weights = transform_weights(raw, config)

    suite = MetricSuite(
        is_raw=inception_style_score(labels),
        is_lfiw=inception_style_score(labels.with_weights(weights)),
        fid_raw=frechet_distance(model, real),
        fid_lfiw=frechet_distance(model.with_weights(weights), real),
        kid_raw=kernel_distance(model, real, bandwidth),
        kid_lfiw=kernel_distance(model.with_weights(weights), real, bandwidth),
        effective_sample_size=effective_sample_size(weights),
    )
    logger.info(
        "FID %.4g -> %.4g, KID %.4g -> %.4g, IS %.4g -> %.4g with importance weights",
        suite.fid_raw,
        suite.fid_lfiw,
        suite.kid_raw,
        suite.kid_lfiw,
        suite.is_raw,
        suite.is_lfiw,
    )
    return suite
