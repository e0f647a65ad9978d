"""Learned dynamics models fitted to off-policy trajectories."""

import logging
from dataclasses import dataclass

import numpy as np

from ..utils.exceptions import ConfigError
from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError
from ..utils.seeding import derive_rng
from .environments import Mdp
from .environments import MdpKind
from .environments import TabularMdp
from .rollouts import Rollouts

logger = logging.getLogger(__name__)

LAPLACE_SMOOTHING = 1.0
RIDGE = 1e-6
CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class DynamicsModel:
    """A fitted transition model.

    ``mdp`` is the template MDP with its transitions replaced by the estimate, so it
    shares the known reward function, initial distribution and horizon. For a bagged
    ensemble ``mdp`` holds the mixture, the mean of the members' transition matrices.

    Attributes:
        mdp (Mdp): The model MDP that rollouts are drawn from.
        members (tuple[Mdp, ...]): The individual fits.
        n_transitions (int): Number of observed transitions.
    """

    mdp: Mdp
    members: tuple[Mdp, ...]
    n_transitions: int

    @property
    def kind(self) -> MdpKind:
        """Kind of the underlying MDP."""
        return self.mdp.kind


def _tabular_counts(
    states: np.ndarray, actions: np.ndarray, next_states: np.ndarray, template: TabularMdp
) -> np.ndarray:
    counts = np.zeros(template.transitions.shape)
    np.add.at(counts, (actions.astype(int), states.astype(int), next_states.astype(int)), 1.0)
    return counts


def _smoothed(counts: np.ndarray, smoothing: float) -> np.ndarray:
    """``(count + lambda) / (row_count + lambda |S|)``."""
    n_states = counts.shape[2]
    return (counts + smoothing) / (counts.sum(axis=2, keepdims=True) + smoothing * n_states)


def _fit_linear(
    states: np.ndarray, actions: np.ndarray, next_states: np.ndarray, ridge: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = states.shape[1]
    design = np.hstack([states, actions])
    gram = design.T @ design + ridge * np.eye(design.shape[1])
    if np.linalg.cond(gram) > CONDITION_LIMIT:
        raise NumericalError(
            "The state-action design matrix is rank deficient beyond ridge repair; "
            "collect more varied transitions"
        )
    coefficients = np.linalg.solve(gram, design.T @ next_states).T
    residuals = next_states - design @ coefficients.T
    noise_cov = residuals.T @ residuals / len(residuals) + ridge * np.eye(d)
    return coefficients[:, :d], coefficients[:, d:], (noise_cov + noise_cov.T) / 2


def fit_dynamics(
    data: Rollouts,
    template: Mdp,
    ensemble_size: int = 1,
    smoothing: float = LAPLACE_SMOOTHING,
    ridge: float = RIDGE,
    seed: int = 0,
) -> DynamicsModel:
    """Fit a dynamics model to observed transitions.

    Tabular models use Laplace-smoothed counts; linear-Gaussian models use least
    squares for ``A`` and ``B`` with the residual covariance plus a ridge for the noise.
    With ``ensemble_size > 1`` (tabular only) each member is fitted to a bootstrap
    resample of the trajectories, drawn from the ``"ensemble"`` stream.

    Args:
        data (Rollouts): Off-policy trajectories from the true environment.
        template (Mdp): MDP supplying the kind, rewards, initial distribution and horizon.
        ensemble_size (int): Number of bagged members.
        smoothing (float): Pseudo-count added to every successor.
        ridge (float): Ridge added to the regression and the noise covariance.
        seed (int): Root seed for the bootstrap resamples.

    Returns:
        DynamicsModel: The fitted model.

    Raises:
        EmptyDataError: If there are no transitions.
        NumericalError: If the linear regression is rank deficient.
    """
    if len(data) == 0 or data.horizon == 0:
        raise EmptyDataError("Cannot fit dynamics without transitions")
    if ensemble_size < 1:
        raise ConfigError(f"ensemble_size must be positive, got {ensemble_size}")
    n_transitions = len(data) * data.horizon

    if isinstance(template, TabularMdp):
        if smoothing <= 0:
            raise ConfigError(f"smoothing must be positive, got {smoothing}")
        if ensemble_size == 1:
            members = [template.with_transitions(_smoothed(_tabular_counts(*data.transitions(), template), smoothing))]
        else:
            rng = derive_rng(seed, "ensemble")
            members = []
            for _ in range(ensemble_size):
                picked = rng.integers(0, len(data), size=len(data))
                s, a, s_next = (x[picked] for x in (data.states[:, :-1], data.actions, data.states[:, 1:]))
                counts = _tabular_counts(s.ravel(), a.ravel(), s_next.ravel(), template)
                members.append(template.with_transitions(_smoothed(counts, smoothing)))
        mean_transitions = np.mean([m.transitions for m in members], axis=0)
        mdp: Mdp = template.with_transitions(mean_transitions / mean_transitions.sum(axis=2, keepdims=True))
        logger.info(
            "Fitted tabular dynamics from %d transitions with %d member(s)", n_transitions, ensemble_size
        )
        return DynamicsModel(mdp=mdp, members=tuple(members), n_transitions=n_transitions)

    if ensemble_size != 1:
        raise ConfigError("Bagged ensembles are only available for tabular dynamics")
    states, actions, next_states = data.transitions()
    if states.ndim != 2 or states.shape[1] != template.state_dim:
        raise ValueError(f"Expected states of dimension {template.state_dim}")
    a_hat, b_hat, noise_hat = _fit_linear(states, actions, next_states, ridge)
    mdp = template.with_transitions(a_hat, b_hat, noise_hat)
    logger.info("Fitted linear-Gaussian dynamics from %d transitions", n_transitions)
    return DynamicsModel(mdp=mdp, members=(mdp,), n_transitions=n_transitions)
