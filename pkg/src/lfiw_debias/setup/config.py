"""Experiment configuration shared by the command line and JSON config files."""

import json
import logging
import os
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields
from enum import Enum
from pathlib import Path
from typing import Any

from ..estimators.weights import WeightConfig
from ..mbope.experiment import OpeConfig
from ..ratio.classifier import TrainConfig
from ..synthetic.augmentation import AugmentConfig
from ..synthetic.fig1 import Fig1Config
from ..utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "LFIW_DEBIAS_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "lfiw-output"


class Command(Enum):
    """Experiments that can be run."""

    TRAIN_RATIO = "train-ratio"
    ESTIMATE = "estimate"
    RESAMPLE = "resample"
    METRICS = "metrics"
    FIG1 = "fig1"
    AUGMENT = "augment"
    OPE = "ope"
    BIAS_VARIANCE = "bias-variance"


def default_output_dir() -> Path:
    """``$LFIW_DEBIAS_OUTPUT_DIR``, or ``./lfiw-output`` when it is not set."""
    return Path(os.environ.get(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


def _check_keys(cls: type, values: dict[str, Any], label: str) -> None:
    unknown = sorted(set(values) - {f.name for f in fields(cls)})
    if unknown:
        raise ConfigError(f"Unknown {label} option(s): {', '.join(unknown)}")


def _train_config(values: Any) -> TrainConfig:
    if isinstance(values, TrainConfig):
        return values
    if not isinstance(values, dict):
        raise ConfigError("'train' must be an object of training options")
    return TrainConfig.from_dict(values)


@dataclass(frozen=True)
class TrainRatioParams:
    """Parameters of ``train-ratio``.

    Attributes:
        train (TrainConfig): Classifier settings; its seed comes from the experiment.
        n_classifiers (int): Ensemble size.
        holdout_fraction (float): Share of each class kept for the calibration report.
        n_bins (int): Calibration bins, at least 2.
        gamma (float | None): Odds ratio; the class-size ratio when ``None``.
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    n_classifiers: int = 1
    holdout_fraction: float = 0.2
    n_bins: int = 10
    gamma: float | None = None

    def __post_init__(self) -> None:
        """Check ranges."""
        object.__setattr__(self, "train", _train_config(self.train))
        if self.n_classifiers < 1:
            raise ConfigError(f"n_classifiers must be positive, got {self.n_classifiers}")
        if self.n_bins < 2:
            raise ConfigError(f"n_bins must be at least 2, got {self.n_bins}")
        if not 0 < self.holdout_fraction < 1:
            raise ConfigError(f"holdout_fraction must be in (0, 1), got {self.holdout_fraction}")

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "TrainRatioParams":
        """Build the parameters, rejecting unknown keys."""
        _check_keys(cls, values, "train-ratio")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary with the nested training options."""
        return {**asdict(self), "train": self.train.to_dict()}


@dataclass(frozen=True)
class EstimateParams:
    """Parameters of ``estimate``.

    Attributes:
        train (TrainConfig): Classifier settings when a classifier is trained.
        n_classifiers (int): Ensemble size when a classifier is trained.
        alpha (float): Flattening power.
        beta (float): Clipping floor.
        self_normalize (bool): Self-normalize the weights.
        gamma (float | None): Odds ratio overriding the classifier's.
        statistic (str): ``"mean"`` or ``"second_moment"`` of one feature column.
        column (int): Feature column the statistic is taken of.
        bootstrap_n (int): Bootstrap resamples for weight intervals; 0 skips them.
        confidence (float): Interval coverage.
    """

    train: TrainConfig = field(default_factory=TrainConfig)
    n_classifiers: int = 1
    alpha: float = 1.0
    beta: float = 0.0
    self_normalize: bool = False
    gamma: float | None = None
    statistic: str = "mean"
    column: int = 0
    bootstrap_n: int = 0
    confidence: float = 0.95

    def __post_init__(self) -> None:
        """Check ranges."""
        object.__setattr__(self, "train", _train_config(self.train))
        if self.statistic not in ("mean", "second_moment"):
            raise ConfigError(f"statistic must be 'mean' or 'second_moment', got {self.statistic!r}")
        if self.column < 0 or self.n_classifiers < 1:
            raise ConfigError("column must be non-negative and n_classifiers positive")
        if self.bootstrap_n == 1 or self.bootstrap_n < 0:
            raise ConfigError(f"bootstrap_n must be 0 or at least 2, got {self.bootstrap_n}")
        self.weight_config()

    def weight_config(self) -> WeightConfig:
        """The estimator variant."""
        return WeightConfig(
            gamma=1.0 if self.gamma is None else self.gamma,
            alpha=self.alpha,
            beta=self.beta,
            self_normalize=self.self_normalize,
        )

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "EstimateParams":
        """Build the parameters, rejecting unknown keys."""
        _check_keys(cls, values, "estimate")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary with the nested training options."""
        return {**asdict(self), "train": self.train.to_dict()}


@dataclass(frozen=True)
class ResampleParams:
    """Parameters of ``resample``.

    Attributes:
        particles (int): SIR particles ``T``.
        draws (int): SIR draws.
        k (int): Support size of the random pair used without an input pair.
        chunk_size (int): Draws per vectorised SIR chunk.
        diagnostic_samples (int): Samples per side for the estimated KL diagnostics.
    """

    particles: int = 100
    draws: int = 10_000
    k: int = 10
    chunk_size: int = 4096
    diagnostic_samples: int = 10_000

    def __post_init__(self) -> None:
        """Check ranges."""
        if min(self.particles, self.draws, self.chunk_size, self.diagnostic_samples) < 1:
            raise ConfigError("particles, draws, chunk_size and diagnostic_samples must be positive")
        if self.k < 2:
            raise ConfigError(f"k must be at least 2, got {self.k}")

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "ResampleParams":
        """Build the parameters, rejecting unknown keys."""
        _check_keys(cls, values, "resample")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary of the fields."""
        return asdict(self)


@dataclass(frozen=True)
class MetricsParams:
    """Parameters of ``metrics``.

    Attributes:
        bandwidth (float): RBF kernel bandwidth of the kernel distance.
        alpha (float): Flattening power.
        beta (float): Clipping floor.
        self_normalize (bool): Self-normalize the weights.
    """

    bandwidth: float = 1.0
    alpha: float = 1.0
    beta: float = 0.0
    self_normalize: bool = False

    def __post_init__(self) -> None:
        """Check ranges."""
        if not self.bandwidth > 0:
            raise ConfigError(f"bandwidth must be positive, got {self.bandwidth}")
        self.weight_config()

    def weight_config(self) -> WeightConfig:
        """The weight transformation."""
        return WeightConfig(alpha=self.alpha, beta=self.beta, self_normalize=self.self_normalize)

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "MetricsParams":
        """Build the parameters, rejecting unknown keys."""
        _check_keys(cls, values, "metrics")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary of the fields."""
        return asdict(self)


@dataclass(frozen=True)
class BiasVarianceParams:
    """Parameters of ``bias-variance`` on the bimodal Gaussian toy.

    Attributes:
        n_trials (int): Independent batches per estimator.
        batch_size (int): Model samples per batch.
        n_per_class (int): Samples per class for the weight classifier.
        alphas (tuple[float, ...]): Flattening powers compared with ``beta = 0``.
        betas (tuple[float, ...]): Clipping floors compared with ``alpha = 1``.
        include_self_normalized (bool): Also compare the self-normalized estimator.
        epochs (int): Classifier training epochs.
    """

    n_trials: int = 50
    batch_size: int = 5000
    n_per_class: int = 1000
    alphas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    betas: tuple[float, ...] = (0.001, 0.01, 0.1, 1.0)
    include_self_normalized: bool = True
    epochs: int = 200

    def __post_init__(self) -> None:
        """Coerce the grids and check ranges."""
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.n_trials < 2:
            raise ConfigError(f"n_trials must be at least 2, got {self.n_trials}")
        if min(self.batch_size, self.n_per_class, self.epochs) < 1:
            raise ConfigError("batch_size, n_per_class and epochs must be positive")
        for config in self.estimator_configs():
            if config.alpha < 0 or config.beta < 0:
                raise ConfigError("alphas and betas must be non-negative")

    def estimator_configs(self) -> list[WeightConfig]:
        """Every compared variant, without duplicates, in a fixed order."""
        configs = [WeightConfig(alpha=a) for a in self.alphas]
        configs += [WeightConfig(beta=b) for b in self.betas]
        if self.include_self_normalized:
            configs.append(WeightConfig(self_normalize=True))
        unique: list[WeightConfig] = []
        for config in configs:
            if config not in unique:
                unique.append(config)
        return unique

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "BiasVarianceParams":
        """Build the parameters, rejecting unknown keys."""
        _check_keys(cls, values, "bias-variance")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary with list-valued grids."""
        return {**asdict(self), "alphas": list(self.alphas), "betas": list(self.betas)}


PARAMETER_TYPES: dict[Command, Any] = {
    Command.TRAIN_RATIO: TrainRatioParams,
    Command.ESTIMATE: EstimateParams,
    Command.RESAMPLE: ResampleParams,
    Command.METRICS: MetricsParams,
    Command.FIG1: Fig1Config,
    Command.AUGMENT: AugmentConfig,
    Command.OPE: OpeConfig,
    Command.BIAS_VARIANCE: BiasVarianceParams,
}

INPUT_KEYS: dict[Command, tuple[str, ...]] = {
    Command.TRAIN_RATIO: ("positives", "negatives"),
    Command.ESTIMATE: ("positives", "negatives", "samples", "classifier", "weights"),
    Command.RESAMPLE: ("pair",),
    Command.METRICS: ("model_features", "real_features", "weights", "classifier", "model_points", "model_logits"),
    Command.FIG1: (),
    Command.AUGMENT: (),
    Command.OPE: ("env", "behavior", "eval"),
    Command.BIAS_VARIANCE: (),
}

# set at the top level of the experiment, never inside params
RESERVED_PARAMS = ("seed", "threads")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: what to run, with which inputs, seed and parameters.

    Attributes:
        command (Command): The experiment.
        seed (int): Root seed of every random stream.
        output_dir (Path): Directory receiving all artifacts and the manifest.
        threads (int | None): Cap on internal parallelism; every core when ``None``.
        inputs (dict[str, str]): Input files by role, see ``INPUT_KEYS``.
        params (dict[str, Any]): Command parameters, validated against ``PARAMETER_TYPES``.
    """

    command: Command
    seed: int = 0
    output_dir: Path = field(default_factory=default_output_dir)
    threads: int | None = None
    inputs: dict[str, str] = field(default_factory=dict)
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """Validate everything before anything runs."""
        try:
            object.__setattr__(self, "command", Command(self.command))
        except ValueError as e:
            known = ", ".join(c.value for c in Command)
            raise ConfigError(f"Unknown command {self.command!r}; expected one of {known}") from e
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**63:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError(f"threads must be positive, got {self.threads}")
        unknown_inputs = sorted(set(self.inputs) - set(INPUT_KEYS[self.command]))
        if unknown_inputs:
            raise ConfigError(
                f"Unknown input(s) for {self.command.value}: {', '.join(unknown_inputs)}"
            )
        reserved = sorted(set(self.params) & set(RESERVED_PARAMS))
        if reserved:
            raise ConfigError(f"Set {', '.join(reserved)} at the top level, not in params")
        self.command_params()

    @property
    def effective_threads(self) -> int:
        """``threads``, or the number of available cores."""
        return self.threads or os.cpu_count() or 1

    def command_params(self) -> Any:
        """The validated parameter object, carrying the experiment's seed and threads."""
        parameter_type = PARAMETER_TYPES[self.command]
        values = dict(self.params)
        names = {f.name for f in fields(parameter_type)}
        if "seed" in names:
            values["seed"] = self.seed
        if "threads" in names:
            values["threads"] = self.effective_threads
        try:
            return parameter_type.from_dict(values)
        except TypeError as e:
            raise ConfigError(f"Invalid {self.command.value} parameters: {e}") from e

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "ExperimentConfig":
        """Build a config from a JSON document, rejecting unknown keys.

        Raises:
            ConfigError: If a key is unknown, the command is missing or a value is invalid.
        """
        if not isinstance(document, dict):
            raise ConfigError("An experiment config must be a JSON object")
        _check_keys(cls, document, "experiment")
        if "command" not in document:
            raise ConfigError("An experiment config needs a 'command'")
        values = dict(document)
        if values.get("output_dir") is None:
            values.pop("output_dir", None)
        for key in ("inputs", "params"):
            if not isinstance(values.get(key, {}), dict):
                raise ConfigError(f"'{key}' must be an object")
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        """Read a config from a JSON file."""
        return cls.from_dict(read_config_document(path))

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible snapshot with the resolved parameters."""
        return {
            "command": self.command.value,
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "threads": self.threads,
            "inputs": dict(sorted(self.inputs.items())),
            "params": self.command_params().to_dict(),
        }


def read_config_document(path: str | Path) -> dict[str, Any]:
    """Parse a JSON config file.

    Raises:
        OSError: If the file cannot be read.
        ConfigError: If it is not valid JSON.
    """
    with open(path, encoding="utf-8") as infile:
        try:
            document = json.load(infile)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return document


def merge_overrides(document: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Apply command-line values over a config document.

    ``None`` values are ignored. ``inputs`` and ``params`` are merged key by key.

    Examples:
        >>> merge_overrides({"seed": 1, "params": {"a": 1}}, {"seed": None, "params": {"b": 2}})
        {'seed': 1, 'params': {'a': 1, 'b': 2}}
    """
    merged = dict(document)
    for key, value in overrides.items():
        if key in ("inputs", "params"):
            nested = dict(merged.get(key) or {})
            nested.update({k: v for k, v in value.items() if v is not None})
            merged[key] = nested
        elif value is not None:
            merged[key] = value
    return merged
