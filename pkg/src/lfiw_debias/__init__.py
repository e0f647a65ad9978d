"""LFIW Debias."""

from . import estimators
from . import mbope
from . import metrics
from . import ratio
from . import resample
from . import setup
from . import synthetic
from . import utils

# Re-import functions and classes from submodules explicitly for top-level access
from .estimators import WeightConfig
from .estimators import estimate_expectation
from .ratio import ClassifierEnsemble
from .ratio import TrainConfig
from .ratio import train_ensemble
from .setup import ExperimentConfig
from .setup import run

# Defines top level if used in wildcard import
__all__ = [
    "ClassifierEnsemble",
    "ExperimentConfig",
    "TrainConfig",
    "WeightConfig",
    "estimate_expectation",
    "estimators",
    "mbope",
    "metrics",
    "ratio",
    "resample",
    "run",
    "setup",
    "synthetic",
    "train_ensemble",
]
