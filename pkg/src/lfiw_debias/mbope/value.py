"""Policy value estimates from model rollouts, corrected with transition weights."""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from ..estimators.weights import WeightConfig
from ..estimators.weights import effective_sample_size
from ..estimators.weights import estimate_from_values
from ..utils.exceptions import ConfigError
from ..utils.exceptions import NumericalError
from .environments import Policy
from .environments import TabularMdp
from .environments import TabularPolicy
from .rollouts import Rollouts
from .rollouts import Trajectory
from .rollouts import ValueEstimate
from .rollouts import as_mdp
from .rollouts import enumerate_trajectories
from .rollouts import rollout
from .transitions import OracleTransitionWeights
from .transitions import TransitionWeights

logger = logging.getLogger(__name__)


def _check_weight_horizon(weight_horizon: int | None, horizon: int) -> int:
    weight_horizon = horizon if weight_horizon is None else weight_horizon
    if not 0 <= weight_horizon <= horizon:
        raise ConfigError(f"The weighting horizon must be in [0, {horizon}], got {weight_horizon}")
    return weight_horizon


def step_weights(rollouts: Rollouts, weights: TransitionWeights) -> np.ndarray:
    """Per-transition weights, shape ``(n, T)``."""
    matrix = np.empty(rollouts.rewards.shape)
    for t in range(rollouts.horizon):
        matrix[:, t] = weights(*rollouts.step(t))
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
        raise NumericalError("Transition weights must be finite and non-negative")
    return matrix


def trajectory_weights(
    rollouts: Rollouts, weights: TransitionWeights, weight_horizon: int | None = None
) -> np.ndarray:
    """Products of the first ``H`` per-transition weights, one per trajectory.

    Transitions from step ``H`` onward contribute a factor of one, so ``H = 0`` gives
    unit weights.

    Args:
        rollouts (Rollouts): Model trajectories.
        weights (TransitionWeights): Per-transition weights.
        weight_horizon (int | None): ``H`` in ``[0, T]``; ``T`` by default.

    Returns:
        np.ndarray: Trajectory weights ``(n,)``.
    """
    weight_horizon = _check_weight_horizon(weight_horizon, rollouts.horizon)
    if weight_horizon == 0:
        return np.ones(len(rollouts))
    sliced = Rollouts(
        states=rollouts.states[:, : weight_horizon + 1],
        actions=rollouts.actions[:, :weight_horizon],
        rewards=rollouts.rewards[:, :weight_horizon],
        log_probs=rollouts.log_probs,
    )
    return np.asarray(np.prod(step_weights(sliced, weights), axis=1))


def trajectory_weight(
    trajectory: Trajectory, weights: TransitionWeights, weight_horizon: int | None = None
) -> float:
    """Weight of a single trajectory; see :func:`trajectory_weights`."""
    batch = Rollouts(
        states=np.asarray(trajectory.states)[None],
        actions=np.asarray(trajectory.actions)[None],
        rewards=np.asarray(trajectory.rewards, dtype=float)[None],
        log_probs=np.array([trajectory.log_prob]),
    )
    return float(trajectory_weights(batch, weights, weight_horizon)[0])


def _estimate(
    rollouts: Rollouts, weights: TransitionWeights, weight_horizon: int | None, self_normalize: bool
) -> ValueEstimate:
    raw = trajectory_weights(rollouts, weights, weight_horizon)
    report = estimate_from_values(rollouts.returns, raw, WeightConfig(self_normalize=self_normalize))
    return ValueEstimate(
        value=report.value,
        stderr=report.stderr,
        effective_sample_size=report.effective_sample_size,
        n_traj=len(rollouts),
    )


def lfiw_value(
    model: Any,
    policy: Policy,
    weights: TransitionWeights,
    n_traj: int,
    horizon: int | None = None,
    weight_horizon: int | None = None,
    seed: int = 0,
    self_normalize: bool = True,
    rollouts: Rollouts | None = None,
) -> ValueEstimate:
    """Trajectory-weighted estimate of a policy's value from model rollouts.

    Each model trajectory is weighted by the product of its first ``H`` transition
    weights, and the weighted mean of the returns is the estimate.

    Args:
        model (DynamicsModel | Mdp): The learned dynamics.
        policy (Policy): The policy to evaluate.
        weights (TransitionWeights): Per-transition weights.
        n_traj (int): Number of model rollouts.
        horizon (int | None): Rollout length; the model's horizon by default.
        weight_horizon (int | None): ``H``; the rollout length by default.
        seed (int): Root seed of the ``"rollout"`` stream.
        self_normalize (bool): Normalize the trajectory weights to sum to one.
        rollouts (Rollouts | None): Precomputed model rollouts, used instead of simulating.

    Returns:
        ValueEstimate: The estimate with its standard error.

    Raises:
        NumericalError: If every trajectory weight is zero under self-normalization.
    """
    if rollouts is None:
        rollouts = rollout(model, policy, n_traj, horizon=horizon, seed=seed)
    return _estimate(rollouts, weights, weight_horizon, self_normalize)


def stepwise_lfiw_value(
    model: Any,
    policy: Policy,
    weights: TransitionWeights,
    n_traj: int,
    horizon: int | None = None,
    seed: int = 0,
    self_normalize: bool = True,
    rollouts: Rollouts | None = None,
) -> ValueEstimate:
    """Estimate where each reward carries the weight of its own transition.

    With self-normalization the weights at each step are divided by their sum across
    the batch and multiplied by the batch size, so unit weights give the plain mean return.

    Args:
        model (DynamicsModel | Mdp): The learned dynamics.
        policy (Policy): The policy to evaluate.
        weights (TransitionWeights): Per-transition weights.
        n_traj (int): Number of model rollouts.
        horizon (int | None): Rollout length; the model's horizon by default.
        seed (int): Root seed of the ``"rollout"`` stream.
        self_normalize (bool): Normalize the weights per step.
        rollouts (Rollouts | None): Precomputed model rollouts.

    Returns:
        ValueEstimate: The estimate; ``effective_sample_size`` is the smallest per-step value.
    """
    if rollouts is None:
        rollouts = rollout(model, policy, n_traj, horizon=horizon, seed=seed)
    matrix = step_weights(rollouts, weights)
    n = len(rollouts)
    if self_normalize:
        totals = matrix.sum(axis=0)
        if np.any(totals <= 0):
            raise NumericalError("Cannot self-normalize a step whose weights sum to zero")
        matrix = n * matrix / totals
    summands = np.sum(matrix * rollouts.rewards, axis=1)
    stderr = float(summands.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    ess = min(effective_sample_size(matrix[:, t]) for t in range(rollouts.horizon))
    return ValueEstimate(value=float(summands.mean()), stderr=stderr, effective_sample_size=ess, n_traj=n)


@dataclass(frozen=True, eq=False)
class HorizonCurve:
    """Estimates for a range of weighting horizons over one rollout set.

    Attributes:
        weight_horizons (tuple[int, ...]): The ``H`` values.
        estimates (tuple[ValueEstimate, ...]): One estimate per ``H``.
        truth (float): True value, NaN when unknown.
    """

    weight_horizons: tuple[int, ...]
    estimates: tuple[ValueEstimate, ...]
    truth: float = float("nan")

    def __len__(self) -> int:
        """Number of points on the curve."""
        return len(self.weight_horizons)

    @property
    def errors(self) -> np.ndarray:
        """``truth - value`` per ``H``."""
        return self.truth - np.array([e.value for e in self.estimates])

    def to_frame(self) -> pd.DataFrame:
        """Columns ``H, value, stderr, delta``."""
        return pd.DataFrame(
            {
                "H": list(self.weight_horizons),
                "value": [e.value for e in self.estimates],
                "stderr": [e.stderr for e in self.estimates],
                "delta": self.errors,
            }
        )


def horizon_sweep(
    model: Any,
    policy: Policy,
    weights: TransitionWeights,
    n_traj: int,
    weight_horizons: Sequence[int],
    horizon: int | None = None,
    seed: int = 0,
    truth: float = float("nan"),
    self_normalize: bool = True,
    rollouts: Rollouts | None = None,
) -> HorizonCurve:
    """Evaluate :func:`lfiw_value` at several weighting horizons on shared rollouts.

    ``H = 0`` is the plain model-based estimate and ``H = T`` the fully weighted one.

    Args:
        model (DynamicsModel | Mdp): The learned dynamics.
        policy (Policy): The policy to evaluate.
        weights (TransitionWeights): Per-transition weights.
        n_traj (int): Number of model rollouts.
        weight_horizons (Sequence[int]): Values of ``H``, each in ``[0, T]``.
        horizon (int | None): Rollout length; the model's horizon by default.
        seed (int): Root seed of the ``"rollout"`` stream.
        truth (float): True value used for the errors.
        self_normalize (bool): Normalize the trajectory weights.
        rollouts (Rollouts | None): Precomputed model rollouts.

    Returns:
        HorizonCurve: One estimate per ``H``, in the given order.
    """
    if rollouts is None:
        rollouts = rollout(model, policy, n_traj, horizon=horizon, seed=seed)
    values = tuple(int(h) for h in weight_horizons)
    for h in values:
        _check_weight_horizon(h, rollouts.horizon)
    estimates = tuple(_estimate(rollouts, weights, h, self_normalize) for h in values)
    logger.info("Evaluated %d weighting horizons on %d rollouts", len(values), len(rollouts))
    return HorizonCurve(weight_horizons=values, estimates=estimates, truth=float(truth))


def exact_lfiw_value(
    true_mdp: TabularMdp,
    model: Any,
    policy: TabularPolicy,
    weights: TransitionWeights | None = None,
    weight_horizon: int | None = None,
) -> float:
    """``E[w(tau) R(tau)]`` over model trajectories, computed by enumerating them all.

    With the default oracle weights and ``H = T`` this equals the true value.

    Args:
        true_mdp (TabularMdp): The real dynamics, used for the oracle weights.
        model (DynamicsModel | TabularMdp): The model dynamics.
        policy (TabularPolicy): The policy to evaluate.
        weights (TransitionWeights | None): Per-transition weights; exact ratios by default.
        weight_horizon (int | None): ``H``; the horizon by default.

    Returns:
        float: The expected weighted return.
    """
    model_mdp = as_mdp(model)
    if not isinstance(model_mdp, TabularMdp):
        raise TypeError("Exact evaluation needs tabular dynamics")
    weights = OracleTransitionWeights(true_mdp, model_mdp) if weights is None else weights
    trajectories = enumerate_trajectories(model_mdp, policy)
    probabilities = np.exp(trajectories.log_probs)
    w = trajectory_weights(trajectories, weights, weight_horizon)
    return float(np.sum(probabilities * w * trajectories.returns))
