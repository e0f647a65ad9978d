"""Bootstrap confidence intervals for classifier-based importance weights.

Each resample retrains the classifier on a resampling of the data and, depending on the
mode, a fresh draw from the model. The interval at a query point is formed from the
quantiles of the retrained classifiers' weights there.
"""

import logging
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd

from ..ratio.classifier import TrainConfig
from ..ratio.classifier import importance_weight
from ..ratio.classifier import train_classifier
from ..ratio.datasets import LabeledRatioDataset
from ..utils.exceptions import ConfigError
from ..utils.sampling import Sampler
from ..utils.sampling import as_points
from ..utils.sampling import draw_samples
from ..utils.seeding import derive_rng

logger = logging.getLogger(__name__)


class BootstrapMode(Enum):
    """Which parts of the training data are regenerated per resample.

    ``EMPIRICAL`` resamples both classes with replacement, ``PARAMETRIC`` keeps the data
    and draws fresh model samples, ``COMBINED`` resamples the data and draws fresh model
    samples.
    """

    EMPIRICAL = "empirical"
    PARAMETRIC = "parametric"
    COMBINED = "combined"


@dataclass(frozen=True)
class BootstrapConfig:
    """Settings for :func:`bootstrap_ci`.

    Attributes:
        n_resamples (int): Number of retrained classifiers, at least 2.
        confidence (float): Coverage of the interval, in ``(0, 1)``.
        mode (BootstrapMode): Resampling scheme.
        seed (int): Root seed of the per-resample streams.
        threads (int): Worker threads; results do not depend on it.
    """

    n_resamples: int = 1000
    confidence: float = 0.95
    mode: BootstrapMode = BootstrapMode.COMBINED
    seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        """Coerce the mode and check ranges."""
        object.__setattr__(self, "mode", BootstrapMode(self.mode))
        if self.n_resamples < 2:
            raise ConfigError(f"n_resamples must be at least 2, got {self.n_resamples}")
        if not 0 < self.confidence < 1:
            raise ConfigError(f"confidence must be in (0, 1), got {self.confidence}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "BootstrapConfig":
        """Build a config from a dictionary, rejecting unknown keys."""
        unknown = sorted(set(values) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"Unknown bootstrap option(s): {', '.join(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary with the mode as a string."""
        values = asdict(self)
        values["mode"] = self.mode.value
        return values


@dataclass(frozen=True, eq=False)
class BootstrapInterval:
    """Per-query-point bootstrap intervals for the importance weight.

    Attributes:
        query_points (np.ndarray): The points, ``(m, d)``.
        lower (np.ndarray): Lower quantile per point.
        upper (np.ndarray): Upper quantile per point.
        point_estimate (np.ndarray): Weight from the classifier trained on the original data.
        resampled (np.ndarray): All resampled weights, ``(n_resamples, m)``.
        confidence (float): Nominal coverage.
    """

    query_points: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    point_estimate: np.ndarray
    resampled: np.ndarray
    confidence: float

    @property
    def width(self) -> np.ndarray:
        """``upper - lower`` per query point."""
        return self.upper - self.lower

    def contains(self, values: Any) -> np.ndarray:
        """Whether each interval contains the matching value."""
        values = np.asarray(values, dtype=float)
        return (self.lower <= values) & (values <= self.upper)

    def to_frame(self) -> pd.DataFrame:
        """One row per query point with feature columns ``x0..x{d-1}`` and the interval."""
        frame = pd.DataFrame(
            self.query_points,
            columns=[f"x{i}" for i in range(self.query_points.shape[1])],
        )
        frame["point_estimate"] = self.point_estimate
        frame["lower"] = self.lower
        frame["upper"] = self.upper
        return frame


def _resample_dataset(
    dataset: LabeledRatioDataset,
    model_sampler: Sampler,
    mode: BootstrapMode,
    rng: np.random.Generator,
) -> LabeledRatioDataset:
    positives = dataset.positives
    negatives = dataset.negatives
    if mode is not BootstrapMode.PARAMETRIC:
        positives = positives[rng.integers(0, len(positives), size=len(positives))]
    if mode is BootstrapMode.EMPIRICAL:
        negatives = negatives[rng.integers(0, len(negatives), size=len(negatives))]
    else:
        negatives = draw_samples(model_sampler, len(negatives), rng, dataset.input_dim)
    return LabeledRatioDataset(positives, negatives, gamma=dataset.gamma)


def bootstrap_ci(
    dataset: LabeledRatioDataset,
    model_sampler: Sampler,
    query_points: Any,
    train: TrainConfig,
    boot: BootstrapConfig,
    on_resample: Callable[[int], None] | None = None,
) -> BootstrapInterval:
    """Bootstrap confidence intervals for the classifier-implied importance weights.

    Resample ``r`` draws from its own stream derived from ``(boot.seed, r)`` and retrains
    with the unchanged ``train`` config, so results do not depend on ``boot.threads``.

    Args:
        dataset (LabeledRatioDataset): Original data (positives) and model samples (negatives).
        model_sampler (Sampler): Draws fresh model samples for the parametric part.
        query_points (Any): Points at which weights are evaluated, ``(m, d)``.
        train (TrainConfig): Classifier training settings.
        boot (BootstrapConfig): Bootstrap settings.
        on_resample (Callable[[int], None] | None): Called with each finished resample index.

    Returns:
        BootstrapInterval: Quantiles ``(1 -/+ confidence) / 2`` of the resampled weights.

    Raises:
        SamplerError: If the model sampler fails.
    """
    queries = as_points(query_points, "query_points")
    gamma = dataset.gamma

    def run(r: int) -> np.ndarray:
        rng = derive_rng(boot.seed, "bootstrap", r)
        resampled = _resample_dataset(dataset, model_sampler, boot.mode, rng)
        if len(np.unique(resampled.positives, axis=0)) == 1:
            logger.warning("Bootstrap resample %d holds a single distinct data point", r)
        logger.debug("Bootstrap resample %d of %d", r + 1, boot.n_resamples)
        clf = train_classifier(resampled, train)
        weights = np.atleast_1d(importance_weight(clf, gamma, queries))
        if on_resample is not None:
            on_resample(r)
        return weights

    logger.info(
        "Running %d %s bootstrap resamples on %d thread(s)",
        boot.n_resamples,
        boot.mode.value,
        boot.threads,
    )
    original = train_classifier(dataset, train)
    point_estimate = np.atleast_1d(importance_weight(original, gamma, queries))
    if boot.threads == 1:
        results = [run(r) for r in range(boot.n_resamples)]
    else:
        with ThreadPoolExecutor(max_workers=boot.threads) as executor:
            results = list(executor.map(run, range(boot.n_resamples)))
    resampled = np.vstack(results)
    tail = (1.0 - boot.confidence) / 2.0
    lower, upper = np.quantile(resampled, [tail, 1.0 - tail], axis=0)
    logger.info(
        "Bootstrap finished; median interval width %.4g", float(np.median(upper - lower))
    )
    return BootstrapInterval(
        query_points=queries,
        lower=lower,
        upper=upper,
        point_estimate=point_estimate,
        resampled=resampled,
        confidence=boot.confidence,
    )
