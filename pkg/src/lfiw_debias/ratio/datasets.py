import json
import logging
from dataclasses import dataclass
from dataclasses import field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from ..utils.exceptions import DimensionMismatchError
from ..utils.exceptions import EmptyDataError
from ..utils.sampling import as_points

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LabeledRatioDataset:
    """Samples from the true distribution (label 1) and from the model (label 0).

    Attributes:
        positives (np.ndarray): Points drawn from ``p``, shape ``(n_pos, d)``.
        negatives (np.ndarray): Points drawn from ``p_theta``, shape ``(n_neg, d)``.
        gamma (float): Odds ratio ``q(y=0) / q(y=1)``. Defaults to ``n_neg / n_pos``.
    """

    positives: np.ndarray
    negatives: np.ndarray
    gamma: float = field(default=float("nan"))

    def __post_init__(self) -> None:
        """Validate the two classes and fill in the odds ratio."""
        positives = as_points(self.positives, "positives")
        negatives = as_points(self.negatives, "negatives")
        if len(positives) == 0 or len(negatives) == 0:
            raise EmptyDataError(
                f"Both classes must be non-empty, got {len(positives)} positives and {len(negatives)} negatives"
            )
        if positives.shape[1] != negatives.shape[1]:
            raise DimensionMismatchError(
                f"Positives have dimension {positives.shape[1]} but negatives have {negatives.shape[1]}"
            )
        gamma = float(self.gamma)
        if np.isnan(gamma):
            gamma = len(negatives) / len(positives)
        if not gamma > 0 or not np.isfinite(gamma):
            raise ValueError(f"gamma must be a positive finite number, got {gamma}")
        object.__setattr__(self, "positives", positives)
        object.__setattr__(self, "negatives", negatives)
        object.__setattr__(self, "gamma", gamma)

    @property
    def input_dim(self) -> int:
        """Feature dimension shared by both classes."""
        return int(self.positives.shape[1])

    def __len__(self) -> int:
        """Total number of labelled points."""
        return len(self.positives) + len(self.negatives)

    def features_and_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Stack both classes into a design matrix and a 0/1 label vector.

        Returns:
            tuple[np.ndarray, np.ndarray]: Features ``(n, d)`` and labels ``(n,)``, positives first.
        """
        features = np.vstack([self.positives, self.negatives])
        labels = np.concatenate([np.ones(len(self.positives)), np.zeros(len(self.negatives))])
        return features, labels

    def split(
        self, holdout_fraction: float, rng: np.random.Generator
    ) -> tuple["LabeledRatioDataset", "LabeledRatioDataset"]:
        """Split each class into a training part and a held-out part.

        The odds ratio of both parts is recomputed from their sizes.

        Args:
            holdout_fraction (float): Fraction of each class that goes to the held-out part.
            rng (np.random.Generator): Stream used for the permutation.

        Returns:
            tuple[LabeledRatioDataset, LabeledRatioDataset]: ``(train, holdout)``.

        Raises:
            EmptyDataError: If a class is too small to leave at least one point on each side.
        """
        if not 0 < holdout_fraction < 1:
            raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
        parts: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        for name, points in (("positives", self.positives), ("negatives", self.negatives)):
            n_holdout = int(round(holdout_fraction * len(points)))
            if n_holdout < 1 or n_holdout >= len(points):
                raise EmptyDataError(
                    f"Cannot hold out {holdout_fraction:.0%} of {len(points)} {name}"
                )
            order = rng.permutation(len(points))
            parts[name] = (points[order[n_holdout:]], points[order[:n_holdout]])
        train = LabeledRatioDataset(parts["positives"][0], parts["negatives"][0])
        holdout = LabeledRatioDataset(parts["positives"][1], parts["negatives"][1])
        return train, holdout


def load_points(path: str | Path) -> np.ndarray:
    """Load sample points from CSV or JSON lines.

    CSV files hold one point per row with one column per feature and a header row.
    ``.jsonl`` files hold one object per line with a ``"features"`` list.

    Args:
        path (str | Path): File to read.

    Returns:
        np.ndarray: Points as an ``(n, d)`` matrix.

    Raises:
        ValueError: If the JSON lines are malformed or rows have different lengths.
    """
    path = Path(path)
    if path.suffix.lower() in {".jsonl", ".ndjson"}:
        rows = []
        with open(path, encoding="utf-8") as infile:
            for line_number, line in enumerate(infile, start=1):
                if not line.strip():
                    continue
                record = json.loads(line)
                if not isinstance(record, dict) or "features" not in record:
                    raise ValueError(f"{path}:{line_number}: expected an object with a 'features' list")
                rows.append(record["features"])
        if len({len(row) for row in rows}) > 1:
            raise DimensionMismatchError(f"{path}: rows have different numbers of features")
        points = as_points(rows, str(path))
    else:
        frame = pd.read_csv(path)
        points = as_points(frame.to_numpy(dtype=float), str(path))
    logger.info("Loaded %d points of dimension %d from %s", len(points), points.shape[1], path)
    return points


def load_ratio_dataset(
    positives_path: str | Path, negatives_path: str | Path, gamma: float | None = None
) -> LabeledRatioDataset:
    """Build a labelled dataset from a file of true samples and a file of model samples.

    Args:
        positives_path (str | Path): Samples from ``p``.
        negatives_path (str | Path): Samples from ``p_theta``.
        gamma (float | None): Odds ratio; estimated from the file sizes when ``None``.

    Returns:
        LabeledRatioDataset: The dataset.
    """
    return LabeledRatioDataset(
        positives=load_points(positives_path),
        negatives=load_points(negatives_path),
        gamma=float("nan") if gamma is None else gamma,
    )
