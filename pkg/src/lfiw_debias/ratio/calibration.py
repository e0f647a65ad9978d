import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from ..utils.exceptions import EmptyDataError
from .classifier import ProbClassifier
from .datasets import LabeledRatioDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CalibrationReport:
    """Reliability statistics of a classifier on a labelled evaluation set.

    Attributes:
        bin_edges (np.ndarray): ``n_bins + 1`` uniform edges on ``[0, 1]``.
        mean_confidence (np.ndarray): Mean predicted probability per bin (0 for empty bins).
        positive_fraction (np.ndarray): Share of label-1 points per bin (0 for empty bins).
        counts (np.ndarray): Number of evaluation points per bin.
        ece (float): Count-weighted mean of ``|confidence - accuracy|`` over bins.
        mce (float): Largest ``|confidence - accuracy|`` over occupied bins.
    """

    bin_edges: np.ndarray
    mean_confidence: np.ndarray
    positive_fraction: np.ndarray
    counts: np.ndarray
    ece: float
    mce: float

    @property
    def n_bins(self) -> int:
        """Number of bins."""
        return len(self.counts)

    def to_frame(self) -> pd.DataFrame:
        """One row per bin with columns ``bin_low, bin_high, mean_conf, frac_pos, count``."""
        return pd.DataFrame(
            {
                "bin_low": self.bin_edges[:-1],
                "bin_high": self.bin_edges[1:],
                "mean_conf": self.mean_confidence,
                "frac_pos": self.positive_fraction,
                "count": self.counts.astype(int),
            }
        )

    def summary_line(self) -> str:
        """Single-line summary, e.g. ``ece=0.0123 mce=0.0456 n=2000 bins=10``."""
        return f"ece={self.ece!r} mce={self.mce!r} n={int(self.counts.sum())} bins={self.n_bins}"

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible representation."""
        return {
            "ece": self.ece,
            "mce": self.mce,
            "bin_edges": self.bin_edges.tolist(),
            "mean_confidence": self.mean_confidence.tolist(),
            "positive_fraction": self.positive_fraction.tolist(),
            "counts": self.counts.astype(int).tolist(),
        }


def reliability_bins(
    probabilities: np.ndarray, labels: np.ndarray, n_bins: int = 10
) -> CalibrationReport:
    """Bin predicted probabilities uniformly and compare them with observed labels.

    A probability ``c`` falls into bin ``min(floor(c * n_bins), n_bins - 1)``, so 1.0
    belongs to the last bin.

    Args:
        probabilities (np.ndarray): Predicted probabilities in ``[0, 1]``.
        labels (np.ndarray): Matching 0/1 labels.
        n_bins (int): Number of bins, at least 2.

    Returns:
        CalibrationReport: The report.

    Raises:
        ValueError: If n_bins is below 2 or the inputs disagree in length.
        EmptyDataError: If there are no predictions.

    Examples:
        >>> report = reliability_bins(np.array([0.5, 0.5]), np.array([1, 0]), n_bins=2)
        >>> report.ece
        0.0
    """
    if n_bins < 2:
        raise ValueError(f"n_bins must be at least 2, got {n_bins}")
    probabilities = np.asarray(probabilities, dtype=float).ravel()
    labels = np.asarray(labels, dtype=float).ravel()
    if probabilities.size == 0:
        raise EmptyDataError("Cannot compute calibration statistics for an empty evaluation set")
    if probabilities.shape != labels.shape:
        raise ValueError(
            f"Got {probabilities.size} probabilities but {labels.size} labels"
        )
    if np.any((probabilities < 0) | (probabilities > 1)):
        raise ValueError("Probabilities must lie in [0, 1]")

    index = np.minimum(np.floor(probabilities * n_bins).astype(int), n_bins - 1)
    counts = np.bincount(index, minlength=n_bins).astype(float)
    confidence_sum = np.bincount(index, weights=probabilities, minlength=n_bins)
    positive_sum = np.bincount(index, weights=labels, minlength=n_bins)
    occupied = counts > 0
    mean_confidence = np.divide(
        confidence_sum, counts, out=np.zeros(n_bins), where=occupied
    )
    positive_fraction = np.divide(positive_sum, counts, out=np.zeros(n_bins), where=occupied)
    gaps = np.abs(mean_confidence - positive_fraction) * occupied
    ece = float(np.sum(counts * gaps) / counts.sum())
    mce = float(gaps.max())
    return CalibrationReport(
        bin_edges=np.linspace(0.0, 1.0, n_bins + 1),
        mean_confidence=mean_confidence,
        positive_fraction=positive_fraction,
        counts=counts.astype(int),
        ece=ece,
        mce=mce,
    )


def calibration_report(
    clf: ProbClassifier | Callable[[np.ndarray], np.ndarray],
    eval_set: LabeledRatioDataset,
    n_bins: int = 10,
) -> CalibrationReport:
    """Reliability diagram statistics of a classifier on held-out labelled data.

    Args:
        clf (ProbClassifier | Callable[[np.ndarray], np.ndarray]): Trained classifier, or any
            callable returning probabilities for a batch of points.
        eval_set (LabeledRatioDataset): Points not used for training.
        n_bins (int): Number of uniform bins.

    Returns:
        CalibrationReport: Per-bin statistics with ECE and MCE.
    """
    points, labels = eval_set.features_and_labels()
    if isinstance(clf, ProbClassifier):
        probabilities = clf.predict_proba(points)
    else:
        probabilities = np.asarray(clf(points), dtype=float)
    report = reliability_bins(probabilities, labels, n_bins)
    logger.info("Calibration on %d points: %s", len(labels), report.summary_line())
    return report
