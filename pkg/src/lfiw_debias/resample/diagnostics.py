"""Diagnostics for whether importance resampling moves a model closer to the data.

For weights ``w`` the resampled model ``p_theta * w / Z`` changes the divergence from the
data distribution by ``log Z - E_p[log w]``. Improvement requires
``E_p[log w] >= log E_{p_theta}[w]``; two weaker conditions, ``E_p[w] >= E_{p_theta}[w]``
and ``E_p[log w] >= E_{p_theta}[log w]``, are necessary but not sufficient.
"""

import logging
from dataclasses import asdict
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import xlogy

from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError
from ..utils.exceptions import SupportError
from ..utils.sampling import as_points
from .distributions import DiscreteDistributionPair
from .sir import WeightFn
from .sir import evaluate_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KlDiagnostics:
    """Estimated change in KL divergence from importance resampling.

    Attributes:
        lhs_estimate (float): Mean of ``log w`` over data samples.
        rhs_log_mean (float): ``log`` of the mean of ``w`` over model samples (a biased estimate of ``log Z``).
        delta_estimate (float): ``lhs_estimate - rhs_log_mean``, the estimated KL reduction.
        nec1_gap (float): ``E_p[w] - E_{p_theta}[w]``.
        nec2_gap (float): ``E_p[log w] - E_{p_theta}[log w]``.
        lhs_stderr (float): Standard error of ``lhs_estimate``.
        rhs_stderr (float): Delta-method standard error of ``rhs_log_mean``.
        nec1_stderr (float): Standard error of ``nec1_gap``.
        nec2_stderr (float): Standard error of ``nec2_gap``.
        n_real (int): Number of data samples (0 for exact computations).
        n_model (int): Number of model samples (0 for exact computations).
    """

    lhs_estimate: float
    rhs_log_mean: float
    delta_estimate: float
    nec1_gap: float
    nec2_gap: float
    lhs_stderr: float = 0.0
    rhs_stderr: float = 0.0
    nec1_stderr: float = 0.0
    nec2_stderr: float = 0.0
    n_real: int = 0
    n_model: int = 0

    @property
    def kl_change(self) -> float:
        """Estimated ``KL(p, resampled) - KL(p, p_theta)``; negative values mean improvement."""
        return -self.delta_estimate

    @property
    def improvement_consistent(self) -> bool:
        """Both necessary conditions for an improvement hold."""
        return self.nec1_gap >= 0 and self.nec2_gap >= 0

    @property
    def verdict(self) -> str:
        """``"improvement-consistent"`` or ``"no-improvement"``."""
        return "improvement-consistent" if self.improvement_consistent else "no-improvement"

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible representation including the derived fields."""
        values = asdict(self)
        values["kl_change"] = self.kl_change
        values["verdict"] = self.verdict
        return values


def _mean_and_stderr(values: np.ndarray) -> tuple[float, float]:
    stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), stderr


def kl_diagnostics(real_data: Any, model_samples: Any, weight_fn: WeightFn) -> KlDiagnostics:
    """Monte Carlo estimates of the KL change and of the two necessary conditions.

    Args:
        real_data (Any): Samples from the data distribution, ``(n, d)``.
        model_samples (Any): Samples from the model, ``(m, d)``.
        weight_fn (WeightFn): Importance weights; must be strictly positive on all samples.

    Returns:
        KlDiagnostics: Estimates with standard errors.

    Raises:
        EmptyDataError: If either sample is empty.
        NumericalError: If a weight is zero, negative or not finite.
    """
    real = as_points(real_data, "real_data")
    model = as_points(model_samples, "model_samples")
    if len(real) == 0 or len(model) == 0:
        raise EmptyDataError("Both the data and the model sample must be non-empty")
    real_weights = evaluate_weights(weight_fn, real)
    model_weights = evaluate_weights(weight_fn, model)
    if np.any(real_weights <= 0) or np.any(model_weights <= 0):
        raise NumericalError("KL diagnostics need strictly positive weights")

    lhs, lhs_stderr = _mean_and_stderr(np.log(real_weights))
    model_mean, model_mean_stderr = _mean_and_stderr(model_weights)
    rhs = float(np.log(model_mean))
    real_mean, real_mean_stderr = _mean_and_stderr(real_weights)
    model_log_mean, model_log_stderr = _mean_and_stderr(np.log(model_weights))
    diagnostics = KlDiagnostics(
        lhs_estimate=lhs,
        rhs_log_mean=rhs,
        delta_estimate=lhs - rhs,
        nec1_gap=real_mean - model_mean,
        nec2_gap=lhs - model_log_mean,
        lhs_stderr=lhs_stderr,
        rhs_stderr=model_mean_stderr / model_mean,
        nec1_stderr=float(np.hypot(real_mean_stderr, model_mean_stderr)),
        nec2_stderr=float(np.hypot(lhs_stderr, model_log_stderr)),
        n_real=len(real),
        n_model=len(model),
    )
    logger.info(
        "KL diagnostics: delta=%.6g nec1=%.6g nec2=%.6g (%s)",
        diagnostics.delta_estimate,
        diagnostics.nec1_gap,
        diagnostics.nec2_gap,
        diagnostics.verdict,
    )
    return diagnostics


def _check_weights(pair: DiscreteDistributionPair, weights: Any) -> np.ndarray:
    table = np.asarray(weights, dtype=float)
    if table.shape != (pair.k,):
        raise ValueError(f"Expected {pair.k} weights, got shape {table.shape}")
    if not np.all(np.isfinite(table)) or np.any(table < 0):
        raise NumericalError("Weights must be finite and non-negative")
    if np.any((pair.p > 0) & (pair.p_theta == 0)):
        raise SupportError("p puts mass on symbols where p_theta has none")
    if np.any((pair.p > 0) & (table == 0)):
        raise SupportError("The weights vanish on a symbol where p has mass")
    return table


def exact_kl_diagnostics(pair: DiscreteDistributionPair, weights: Any) -> KlDiagnostics:
    """The quantities of :func:`kl_diagnostics` computed exactly by enumeration.

    Args:
        pair (DiscreteDistributionPair): Data and model distributions.
        weights (Any): One positive weight per symbol where either distribution has mass.

    Returns:
        KlDiagnostics: Exact values with zero standard errors.

    Examples:
        >>> pair = DiscreteDistributionPair([0.75, 0.25], [0.25, 0.75])
        >>> round(exact_kl_diagnostics(pair, [3.0, 1.0 / 3.0]).nec1_gap, 4)
        1.3333
    """
    table = _check_weights(pair, weights)
    if np.any((pair.p_theta > 0) & (table == 0)):
        raise SupportError("The weights vanish on a symbol where p_theta has mass")
    log_table = np.log(np.where(table > 0, table, 1.0))
    lhs = float(np.dot(pair.p, log_table))
    z = float(np.dot(pair.p_theta, table))
    rhs = float(np.log(z))
    return KlDiagnostics(
        lhs_estimate=lhs,
        rhs_log_mean=rhs,
        delta_estimate=lhs - rhs,
        nec1_gap=float(np.dot(pair.p, table) - z),
        nec2_gap=lhs - float(np.dot(pair.p_theta, log_table)),
    )


def exact_delta_kl(pair: DiscreteDistributionPair, weights: Any) -> float:
    """``KL(p, p_theta * w / Z) - KL(p, p_theta)`` by direct summation.

    Args:
        pair (DiscreteDistributionPair): Data and model distributions.
        weights (Any): One weight per symbol, positive wherever ``p`` has mass.

    Returns:
        float: The KL change; negative values mean the resampled model is closer to ``p``.

    Raises:
        SupportError: If ``p`` has mass where the model or the weights vanish.

    Examples:
        >>> pair = DiscreteDistributionPair([0.75, 0.25], [0.25, 0.75])
        >>> exact_delta_kl(pair, [1.0, 1.0])
        0.0
    """
    table = _check_weights(pair, weights)
    resampled = pair.induced_distribution(table)
    support = pair.p > 0
    kl_resampled = float(np.sum(xlogy(pair.p[support], pair.p[support] / resampled[support])))
    kl_base = float(np.sum(xlogy(pair.p[support], pair.p[support] / pair.p_theta[support])))
    return kl_resampled - kl_base


INSUFFICIENCY_WITNESS = DiscreteDistributionPair(p=[0.5, 0.5], p_theta=[0.4, 0.6])
"""Distributions for which the weights :data:`INSUFFICIENCY_WEIGHTS` satisfy both
necessary conditions but still increase the KL divergence."""

INSUFFICIENCY_WEIGHTS = np.array([100.0, 1.0])
