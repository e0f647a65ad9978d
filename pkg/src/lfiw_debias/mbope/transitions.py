"""Per-transition importance weights: learned classifiers and exact density ratios."""

import logging
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from ..ratio.classifier import ClassifierEnsemble
from ..ratio.classifier import TrainConfig
from ..ratio.classifier import train_ensemble
from ..ratio.datasets import LabeledRatioDataset
from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import SupportError
from ..utils.seeding import derive_rng
from .dynamics import DynamicsModel
from .environments import Mdp
from .environments import TabularMdp
from .rollouts import Rollouts

logger = logging.getLogger(__name__)


class TransitionWeights(Protocol):
    """Maps batches of ``(s, a, s')`` triples to non-negative weights."""

    def __call__(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> np.ndarray:
        """One weight per triple."""
        ...


class UnitTransitionWeights:
    """Weights identically one; recovers the plain model-based estimate."""

    def __call__(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> np.ndarray:
        """Ones."""
        return np.ones(len(states))


def transition_features(
    mdp: Mdp, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
) -> np.ndarray:
    """Classifier inputs for transition triples.

    Tabular triples are one-hot encoded jointly, one column per ``(s, a, s')`` cell;
    continuous triples are concatenated as ``[s, a, s']``.

    Examples:
        >>> from lfiw_debias.mbope.environments import four_state_chain
        >>> mdp = four_state_chain().mdp
        >>> transition_features(mdp, np.array([0]), np.array([1]), np.array([1])).argmax()
        5
    """
    if isinstance(mdp, TabularMdp):
        cell = (np.asarray(states, dtype=int) * mdp.n_actions + np.asarray(actions, dtype=int)) * mdp.n_states
        cell = cell + np.asarray(next_states, dtype=int)
        features = np.zeros((cell.size, mdp.n_states * mdp.n_actions * mdp.n_states))
        features[np.arange(cell.size), cell] = 1.0
        return features
    return np.hstack(
        [np.asarray(states, dtype=float), np.asarray(actions, dtype=float), np.asarray(next_states, dtype=float)]
    )


@dataclass(frozen=True, eq=False)
class TransitionClassifier:
    """Learned weights ``gamma c / (1 - c)`` for transition triples.

    Attributes:
        weights (ClassifierEnsemble): Classifier(s) over :func:`transition_features`.
        mdp (Mdp): Template fixing the feature encoding.
    """

    weights: ClassifierEnsemble
    mdp: Mdp

    @property
    def gamma(self) -> float:
        """Odds ratio, 1 under the paired construction."""
        return self.weights.gamma

    def features(self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray) -> np.ndarray:
        """Encoded triples."""
        return transition_features(self.mdp, states, actions, next_states)

    def predict_proba(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> np.ndarray:
        """Mean probability over the ensemble that each triple is real."""
        features = self.features(states, actions, next_states)
        return np.mean(
            [np.atleast_1d(clf.predict_proba(features)) for clf in self.weights.classifiers], axis=0
        )

    def __call__(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> np.ndarray:
        """Importance weight per triple."""
        return self.weights(self.features(states, actions, next_states))


def train_transition_classifier(
    real: Rollouts, model: DynamicsModel, train: TrainConfig, n_classifiers: int = 1
) -> TransitionClassifier:
    """Train a classifier between observed and model-generated transitions.

    For every observed ``(s, a, s')`` a negative ``(s, a, s_hat)`` is formed by drawing
    ``s_hat`` from the model at the same state and action, using the ``"negatives"``
    stream of ``train.seed``. Positives and negatives are paired, so ``gamma = 1``.

    Args:
        real (Rollouts): Off-policy trajectories from the true environment.
        model (DynamicsModel): The fitted dynamics.
        train (TrainConfig): Classifier settings.
        n_classifiers (int): Number of classifiers averaged, each with its own seed.

    Returns:
        TransitionClassifier: The trained weights.
    """
    if len(real) == 0:
        raise EmptyDataError("Cannot train a transition classifier without transitions")
    states, actions, next_states = real.transitions()
    generated = model.mdp.step(states, actions, derive_rng(train.seed, "negatives"))  # type: ignore[arg-type]
    dataset = LabeledRatioDataset(
        positives=transition_features(model.mdp, states, actions, next_states),
        negatives=transition_features(model.mdp, states, actions, generated),
    )
    logger.info("Training transition classifier on %d paired triples", len(states))
    ensemble = train_ensemble(dataset, train, n_classifiers)
    return TransitionClassifier(weights=ensemble, mdp=model.mdp)


@dataclass(frozen=True, eq=False)
class OracleTransitionWeights:
    """Exact ratios ``P(s' | s, a) / P_theta(s' | s, a)``.

    Attributes:
        true_mdp (Mdp): The real dynamics.
        model_mdp (Mdp): The model dynamics.
    """

    true_mdp: Mdp
    model_mdp: Mdp

    def __post_init__(self) -> None:
        """Check that both MDPs are of the same kind."""
        if self.true_mdp.kind is not self.model_mdp.kind:
            raise TypeError("Oracle weights need two MDPs of the same kind")

    def __call__(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> np.ndarray:
        """Exact ratio per triple."""
        log_p = self.true_mdp.transition_log_prob(states, actions, next_states)  # type: ignore[arg-type]
        log_q = self.model_mdp.transition_log_prob(states, actions, next_states)  # type: ignore[arg-type]
        if np.any(np.isneginf(log_q) & np.isfinite(log_p)):
            raise SupportError("The model assigns zero probability to a possible transition")
        with np.errstate(invalid="ignore"):
            ratio = np.exp(log_p - log_q)
        return np.where(np.isneginf(log_p), 0.0, ratio)
