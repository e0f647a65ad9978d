import logging
from collections.abc import Callable
from collections.abc import Sequence
from dataclasses import asdict
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from ..utils.exceptions import ConfigError
from ..utils.exceptions import SamplerError
from ..utils.seeding import derive_rng
from .weights import WeightConfig
from .weights import WeightedBatch
from .weights import estimate_from_values
from .weights import evaluate_statistic

logger = logging.getLogger(__name__)

Statistic = tuple[str, Callable[[np.ndarray], Any]]
TrialSampler = Callable[[np.random.Generator], WeightedBatch]


@dataclass(frozen=True)
class BiasVarianceRecord:
    """Bias, variance and mean squared error of one estimated statistic.

    Attributes:
        statistic_id (str): Name of the statistic.
        truth (float): True value.
        mean_estimate (float): Mean estimate over trials.
        bias (float): ``truth - mean_estimate``.
        variance (float): Population variance of the estimates over trials.
        mse (float): Mean squared error over trials, ``bias**2 + variance``.
    """

    statistic_id: str
    truth: float
    mean_estimate: float
    bias: float
    variance: float
    mse: float


@dataclass(frozen=True)
class BiasVarianceReport:
    """Bias-variance decomposition of one estimator variant over several statistics.

    Attributes:
        config (WeightConfig): The estimator variant.
        records (tuple[BiasVarianceRecord, ...]): One record per statistic.
        n_trials (int): Number of independent trials.
    """

    config: WeightConfig
    records: tuple[BiasVarianceRecord, ...]
    n_trials: int

    def summary(self) -> dict[str, float]:
        """Unweighted means of squared bias, variance and mse over the statistics."""
        return {
            "bias_squared": float(np.mean([r.bias**2 for r in self.records])),
            "abs_bias": float(np.mean([abs(r.bias) for r in self.records])),
            "variance": float(np.mean([r.variance for r in self.records])),
            "mse": float(np.mean([r.mse for r in self.records])),
        }

    def to_frame(self) -> pd.DataFrame:
        """One row per statistic, with the estimator label in the first column."""
        frame = pd.DataFrame([asdict(r) for r in self.records])
        frame.insert(0, "estimator", self.config.label)
        return frame


def bias_variance_decompose(
    estimator_configs: Sequence[WeightConfig],
    statistics: Sequence[Statistic],
    truth: Sequence[float],
    trial_sampler: TrialSampler,
    n_trials: int,
    seed: int = 0,
) -> list[BiasVarianceReport]:
    """Decompose the mean squared error of several estimator variants.

    Every trial draws one batch, evaluates each statistic once and reuses the values
    for every estimator variant, so the variants are compared on identical data.

    Args:
        estimator_configs (Sequence[WeightConfig]): Variants to compare.
        statistics (Sequence[Statistic]): ``(id, f)`` pairs.
        truth (Sequence[float]): True value of each statistic.
        trial_sampler (TrialSampler): Returns a fresh batch given the trial's stream.
        n_trials (int): Number of trials, at least 2.
        seed (int): Root seed; trial ``i`` uses the stream ``("trials", i)``.

    Returns:
        list[BiasVarianceReport]: One report per estimator variant, in input order.

    Raises:
        ConfigError: If the inputs are inconsistent.
        SamplerError: If the trial sampler fails.
    """
    if n_trials < 2:
        raise ConfigError(f"n_trials must be at least 2, got {n_trials}")
    if len(statistics) != len(truth):
        raise ConfigError(f"Got {len(statistics)} statistics but {len(truth)} true values")
    if not estimator_configs or not statistics:
        raise ConfigError("Need at least one estimator config and one statistic")

    estimates = np.empty((len(estimator_configs), len(statistics), n_trials))
    for trial in range(n_trials):
        try:
            batch = trial_sampler(derive_rng(seed, "trials", trial))
        except Exception as e:
            raise SamplerError(f"Trial sampler failed in trial {trial}: {e}") from e
        for j, (_, f) in enumerate(statistics):
            values = evaluate_statistic(f, batch.points)
            for i, config in enumerate(estimator_configs):
                estimates[i, j, trial] = estimate_from_values(
                    values, batch.raw_weights, config, warn_low_ess=False
                ).value
    logger.info(
        "Ran %d trials for %d estimators and %d statistics",
        n_trials,
        len(estimator_configs),
        len(statistics),
    )

    truth_values = np.asarray(truth, dtype=float)
    reports = []
    for i, config in enumerate(estimator_configs):
        records = []
        for j, (statistic_id, _) in enumerate(statistics):
            trials = estimates[i, j]
            mean = float(trials.mean())
            records.append(
                BiasVarianceRecord(
                    statistic_id=statistic_id,
                    truth=float(truth_values[j]),
                    mean_estimate=mean,
                    bias=float(truth_values[j] - mean),
                    variance=float(np.mean((trials - mean) ** 2)),
                    mse=float(np.mean((truth_values[j] - trials) ** 2)),
                )
            )
        reports.append(BiasVarianceReport(config=config, records=tuple(records), n_trials=n_trials))
    return reports
