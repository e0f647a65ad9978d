"""End-to-end off-policy evaluation: collect data, fit a model, weight its rollouts."""

import logging
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import fields
from dataclasses import replace
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd

from ..ratio.classifier import Activation
from ..ratio.classifier import Architecture
from ..ratio.classifier import TrainConfig
from ..utils.exceptions import ConfigError
from .dynamics import DynamicsModel
from .dynamics import fit_dynamics
from .environments import Mdp
from .environments import Policy
from .environments import TabularMdp
from .environments import TabularPolicy
from .environments import corrupt_dynamics
from .environments import four_state_chain
from .rollouts import ValueEstimate
from .rollouts import ground_truth_value
from .rollouts import monte_carlo_value
from .rollouts import rollout
from .transitions import OracleTransitionWeights
from .transitions import TransitionWeights
from .transitions import train_transition_classifier
from .value import HorizonCurve
from .value import horizon_sweep
from .value import stepwise_lfiw_value

logger = logging.getLogger(__name__)


class TransitionWeightSource(Enum):
    """Where the per-transition weights come from."""

    CLASSIFIER = "classifier"
    ORACLE = "oracle"


@dataclass(frozen=True)
class OpeConfig:
    """Settings for :func:`run_ope_experiment`.

    Attributes:
        n_traj (int): Model rollouts per estimate.
        n_data_traj (int): Behaviour-policy trajectories collected from the true MDP.
        horizon (int | None): Episode length; the MDP's horizon when ``None``.
        weight_horizons (tuple[int, ...] | None): ``H`` values of the sweep; every step when ``None``.
        seed (int): Root seed.
        self_normalize (bool): Self-normalize the trajectory weights.
        weights (TransitionWeightSource): Learned or exact transition weights.
        corruption (float): Uniform mixing applied to the learned tabular dynamics.
        ensemble_size (int): Bagged tabular dynamics members.
        n_classifiers (int): Transition classifiers averaged.
        epochs (int): Classifier training epochs.
        learning_rate (float): Classifier step size.
        hidden_units (int): Width of the MLP used for continuous states.
        n_truth_traj (int): Rollouts of the true MDP when no exact value is available.
    """

    n_traj: int = 100
    n_data_traj: int = 1000
    horizon: int | None = None
    weight_horizons: tuple[int, ...] | None = None
    seed: int = 0
    self_normalize: bool = True
    weights: TransitionWeightSource = TransitionWeightSource.CLASSIFIER
    corruption: float = 0.0
    ensemble_size: int = 1
    n_classifiers: int = 1
    epochs: int = 200
    learning_rate: float = 1e-2
    hidden_units: int = 64
    n_truth_traj: int = 100_000

    def __post_init__(self) -> None:
        """Coerce enum and tuple fields and check ranges."""
        object.__setattr__(self, "weights", TransitionWeightSource(self.weights))
        if self.weight_horizons is not None:
            object.__setattr__(self, "weight_horizons", tuple(int(h) for h in self.weight_horizons))
        if min(self.n_traj, self.n_data_traj, self.ensemble_size, self.n_classifiers, self.n_truth_traj) < 1:
            raise ConfigError("Trajectory counts, ensemble_size and n_classifiers must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ConfigError(f"horizon must be at least 1, got {self.horizon}")
        if not 0 <= self.corruption <= 1:
            raise ConfigError(f"corruption must be in [0, 1], got {self.corruption}")

    @classmethod
    def from_dict(cls, values: dict[str, Any]) -> "OpeConfig":
        """Build a config from a dictionary, rejecting unknown keys."""
        unknown = sorted(set(values) - {f.name for f in fields(cls)})
        if unknown:
            raise ConfigError(f"Unknown ope option(s): {', '.join(unknown)}")
        return cls(**values)

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary with the weight source as a string."""
        values = asdict(self)
        values["weights"] = self.weights.value
        if self.weight_horizons is not None:
            values["weight_horizons"] = list(self.weight_horizons)
        return values

    def train_config(self, mdp: Mdp) -> TrainConfig:
        """Logistic regression on one-hot triples, or a swish MLP for continuous states."""
        if isinstance(mdp, TabularMdp):
            return TrainConfig(
                architecture=Architecture.LOGISTIC,
                learning_rate=self.learning_rate,
                epochs=self.epochs,
                seed=self.seed,
            )
        return TrainConfig(
            architecture=Architecture.MLP,
            activation=Activation.SWISH,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            hidden_units=self.hidden_units,
            seed=self.seed,
        )


@dataclass(frozen=True, eq=False)
class OpeResult:
    """Outcome of :func:`run_ope_experiment`.

    Attributes:
        curve (HorizonCurve): Estimates per weighting horizon.
        stepwise (ValueEstimate): Stepwise-weighted estimate on the same rollouts.
        truth (float): True value of the evaluation policy.
        model (DynamicsModel): The learned dynamics.
    """

    curve: HorizonCurve
    stepwise: ValueEstimate
    truth: float
    model: DynamicsModel

    @property
    def model_estimate(self) -> float:
        """The unweighted estimate, ``H = 0`` on the shared rollouts."""
        return self.curve.estimates[0].value if self.curve.weight_horizons[0] == 0 else float("nan")

    def to_frame(self) -> pd.DataFrame:
        """Columns ``H, value, stderr, delta``."""
        return self.curve.to_frame()

    def summary(self) -> dict[str, Any]:
        """Scalar results for reports."""
        return {
            "truth": self.truth,
            "model_estimate": self.model_estimate,
            "full_horizon": self.curve.estimates[-1].to_dict(),
            "stepwise": self.stepwise.to_dict(),
            "stepwise_delta": self.truth - self.stepwise.value,
        }


def true_value(mdp: Mdp, policy: Policy, n_traj: int, seed: int) -> float:
    """Exact value for tabular MDPs, a Monte Carlo mean otherwise."""
    if isinstance(mdp, TabularMdp) and isinstance(policy, TabularPolicy):
        return ground_truth_value(mdp, policy)
    return monte_carlo_value(mdp, policy, n_traj, seed=seed).value


def run_ope_experiment(
    config: OpeConfig,
    mdp: Mdp | None = None,
    behavior: Policy | None = None,
    evaluation: Policy | None = None,
) -> OpeResult:
    """Evaluate a policy from behaviour data with a learned model and transition weights.

    Without an MDP the four-state chain benchmark is used with its two policies.

    Args:
        config (OpeConfig): Experiment settings.
        mdp (Mdp | None): True dynamics.
        behavior (Policy | None): Policy that collected the data.
        evaluation (Policy | None): Policy to evaluate.

    Returns:
        OpeResult: The horizon curve, the stepwise estimate and the true value.
    """
    if mdp is None:
        benchmark = four_state_chain()
        mdp, behavior, evaluation = benchmark.mdp, benchmark.behavior, benchmark.evaluation
    if behavior is None or evaluation is None:
        raise ConfigError("Both a behaviour and an evaluation policy are required")
    if config.horizon is not None:
        mdp = replace(mdp, horizon=config.horizon)
    horizons = config.weight_horizons or tuple(range(mdp.horizon + 1))

    data = rollout(mdp, behavior, config.n_data_traj, seed=config.seed, stream="data")
    model = fit_dynamics(data, mdp, config.ensemble_size, seed=config.seed)
    if config.corruption > 0:
        if not isinstance(model.mdp, TabularMdp):
            raise ConfigError("corruption is only available for tabular dynamics")
        corrupted = corrupt_dynamics(model.mdp, config.corruption)
        model = DynamicsModel(mdp=corrupted, members=(corrupted,), n_transitions=model.n_transitions)

    weights: TransitionWeights
    if config.weights is TransitionWeightSource.ORACLE:
        weights = OracleTransitionWeights(mdp, model.mdp)
    else:
        weights = train_transition_classifier(data, model, config.train_config(mdp), config.n_classifiers)

    truth = true_value(mdp, evaluation, config.n_truth_traj, config.seed)
    model_rollouts = rollout(model, evaluation, config.n_traj, seed=config.seed)
    curve = horizon_sweep(
        model,
        evaluation,
        weights,
        config.n_traj,
        horizons,
        truth=truth,
        self_normalize=config.self_normalize,
        rollouts=model_rollouts,
    )
    stepwise = stepwise_lfiw_value(
        model,
        evaluation,
        weights,
        config.n_traj,
        self_normalize=config.self_normalize,
        rollouts=model_rollouts,
    )
    logger.info(
        "True value %.4f, model estimate %.4f, weighted estimate %.4f, stepwise %.4f",
        truth,
        float(curve.estimates[0].value),
        float(curve.estimates[-1].value),
        stepwise.value,
    )
    return OpeResult(curve=curve, stepwise=stepwise, truth=truth, model=model)


def mean_absolute_errors(results: list[OpeResult]) -> dict[str, float]:
    """Mean ``|delta|`` of the first and last horizon and of the stepwise estimate."""
    return {
        "first_horizon": float(np.mean([abs(r.curve.errors[0]) for r in results])),
        "last_horizon": float(np.mean([abs(r.curve.errors[-1]) for r in results])),
        "stepwise": float(np.mean([abs(r.truth - r.stepwise.value) for r in results])),
    }
