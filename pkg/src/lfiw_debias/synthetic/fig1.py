"""Classifier probabilities against the Bayes-optimal curve for a bimodal target.

A unimodal Gaussian is fitted to samples from a two-component mixture, a classifier is
trained to tell mixture samples from model samples, and its probabilities are compared
with the optimal ones on a grid, optionally with bootstrap bands.
"""

import logging
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
from typing import Any

import numpy as np
import pandas as pd

from ..estimators.bootstrap import BootstrapConfig
from ..estimators.bootstrap import bootstrap_ci
from ..ratio.classifier import ProbClassifier
from ..ratio.classifier import TrainConfig
from ..ratio.classifier import train_classifier
from ..ratio.datasets import LabeledRatioDataset
from ..utils.exceptions import ConfigError
from ..utils.seeding import derive_rng
from .gaussians import GRID_HIGH
from .gaussians import GRID_LOW
from .gaussians import GRID_POINTS
from .gaussians import GaussianMixture1D
from .gaussians import MomentMatchedGaussian
from .gaussians import analytic_bayes_curve
from .gaussians import fig1_grid
from .gaussians import fig1_target
from .gaussians import fit_moment_matched

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Fig1Config:
    """Settings for :func:`run_fig1_experiment`.

    Attributes:
        n_per_class (int): Data samples and model samples, each at least 10.
        seed (int): Root seed.
        n_bootstrap (int): Bootstrap resamples for the bands; 0 skips the bands.
        confidence (float): Band coverage.
        threads (int): Bootstrap worker threads.
        epochs (int): Classifier training epochs.
        hidden_units (int): MLP width.
        learning_rate (float): Classifier step size.
        batch_size (int): Classifier mini-batch size.
        grid_low (float): Left end of the evaluation grid.
        grid_high (float): Right end of the evaluation grid.
        grid_points (int): Number of grid points.
    """

    n_per_class: int = 1000
    seed: int = 0
    n_bootstrap: int = 0
    confidence: float = 0.95
    threads: int = 1
    epochs: int = 200
    hidden_units: int = 100
    learning_rate: float = 1e-2
    batch_size: int = 64
    grid_low: float = GRID_LOW
    grid_high: float = GRID_HIGH
    grid_points: int = GRID_POINTS

    def __post_init__(self) -> None:
        """Check ranges."""
        if self.n_per_class < 10:
            raise ConfigError(f"n_per_class must be at least 10, got {self.n_per_class}")
        if self.n_bootstrap == 1 or self.n_bootstrap < 0:
            raise ConfigError(f"n_bootstrap must be 0 or at least 2, got {self.n_bootstrap}")
        if not self.grid_low < self.grid_high or self.grid_points < 2:
            raise ConfigError("The grid needs grid_low < grid_high and at least two points")

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "Fig1Config":
        """Build a config from a dictionary, rejecting unknown keys."""
        unknown = sorted(set(values) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"Unknown fig1 option(s): {', '.join(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary of the fields."""
        return asdict(self)

    def train_config(self) -> TrainConfig:
        """The classifier settings, an MLP with tanh units."""
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            hidden_units=self.hidden_units,
        )


@dataclass(frozen=True, eq=False)
class Fig1Result:
    """Trained and optimal probability curves.

    Attributes:
        grid (np.ndarray): Evaluation points.
        c_hat (np.ndarray): Trained classifier probabilities.
        c_opt (np.ndarray): Bayes-optimal probabilities.
        band_lo (np.ndarray): Lower bootstrap band (NaN without bootstrap).
        band_hi (np.ndarray): Upper bootstrap band (NaN without bootstrap).
        mean_abs_gap (float): Mean of ``|c_hat - c_opt|`` over the grid.
        gamma (float): Odds ratio, 1 for equal class sizes.
        target (GaussianMixture1D): True distribution.
        model (MomentMatchedGaussian): Fitted model.
        classifier (ProbClassifier): Trained classifier.
    """

    grid: np.ndarray
    c_hat: np.ndarray
    c_opt: np.ndarray
    band_lo: np.ndarray
    band_hi: np.ndarray
    mean_abs_gap: float
    gamma: float
    target: GaussianMixture1D
    model: MomentMatchedGaussian
    classifier: ProbClassifier

    def to_frame(self) -> pd.DataFrame:
        """Columns ``x, c_hat, c_opt, band_lo, band_hi``."""
        return pd.DataFrame(
            {
                "x": self.grid,
                "c_hat": self.c_hat,
                "c_opt": self.c_opt,
                "band_lo": self.band_lo,
                "band_hi": self.band_hi,
            }
        )

    def summary(self) -> dict[str, Any]:
        """Scalar results for reports."""
        return {
            "mean_abs_gap": self.mean_abs_gap,
            "gamma": self.gamma,
            "model_mean": self.model.mean,
            "model_std": self.model.std,
            "training_loss": self.classifier.training_loss,
        }


def run_fig1_experiment(config: Fig1Config, target: GaussianMixture1D | None = None) -> Fig1Result:
    """Train a classifier between mixture samples and moment-matched model samples.

    Args:
        config (Fig1Config): Experiment settings.
        target (GaussianMixture1D | None): True distribution; the canonical bimodal mixture by default.

    Returns:
        Fig1Result: Curves on the grid and their mean absolute gap.
    """
    target = fig1_target() if target is None else target
    n = config.n_per_class
    real = target.sample(n, derive_rng(config.seed, "data"))
    model = fit_moment_matched(real)
    fake = model.sample(n, derive_rng(config.seed, "negatives"))
    dataset = LabeledRatioDataset(real, fake)
    logger.info(
        "Fitted model N(%.4f, %.4f^2) to %d mixture samples", model.mean, model.std, n
    )

    train = config.train_config()
    classifier = train_classifier(dataset, train)
    grid = fig1_grid(config.grid_low, config.grid_high, config.grid_points)
    c_hat = classifier.predict_proba(grid.reshape(-1, 1))
    c_opt = analytic_bayes_curve(target, model, dataset.gamma, grid)

    band_lo = np.full(grid.size, np.nan)
    band_hi = np.full(grid.size, np.nan)
    if config.n_bootstrap:
        boot = BootstrapConfig(
            n_resamples=config.n_bootstrap,
            confidence=config.confidence,
            seed=config.seed,
            threads=config.threads,
        )
        interval = bootstrap_ci(dataset, model.sample, grid.reshape(-1, 1), train, boot)
        # weight quantiles map to probability quantiles since c = w / (w + gamma) is monotone
        band_lo = interval.lower / (interval.lower + dataset.gamma)
        band_hi = interval.upper / (interval.upper + dataset.gamma)

    gap = float(np.mean(np.abs(c_hat - c_opt)))
    logger.info("Mean absolute gap to the optimal curve: %.4f", gap)
    return Fig1Result(
        grid=grid,
        c_hat=c_hat,
        c_opt=c_opt,
        band_lo=band_lo,
        band_hi=band_hi,
        mean_abs_gap=gap,
        gamma=dataset.gamma,
        target=target,
        model=model,
        classifier=classifier,
    )
