"""Finite-horizon MDPs and policies: tabular and linear-Gaussian.

Tabular states and actions are integer indices; batches of them are ``(n,)`` integer
arrays. Linear-Gaussian states are ``(n, d)`` and actions ``(n, m)`` float arrays.
"""

import json
import logging
from dataclasses import dataclass
from dataclasses import replace
from enum import Enum
from pathlib import Path
from typing import Any
from typing import Union

import numpy as np
from scipy.stats import multivariate_normal

from ..utils.exceptions import ConfigError
from ..utils.exceptions import DimensionMismatchError

logger = logging.getLogger(__name__)

STOCHASTIC_TOLERANCE = 1e-12


class MdpKind(Enum):
    """Supported MDP families."""

    TABULAR = "tabular"
    LINEAR_GAUSSIAN = "linear_gaussian"


def _stochastic(values: Any, name: str, axis: int = -1) -> np.ndarray:
    matrix = np.array(values, dtype=float)
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
        raise ValueError(f"'{name}' must be finite and non-negative")
    if np.any(np.abs(matrix.sum(axis=axis) - 1.0) > STOCHASTIC_TOLERANCE):
        raise ValueError(f"'{name}' rows must sum to 1")
    matrix.setflags(write=False)
    return matrix


def _positive_definite(values: Any, name: str) -> np.ndarray:
    matrix = np.array(values, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"'{name}' must be a square matrix")
    if not np.allclose(matrix, matrix.T, atol=1e-12):
        raise ValueError(f"'{name}' must be symmetric")
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as e:
        raise ValueError(f"'{name}' must be positive definite") from e
    matrix.setflags(write=False)
    return matrix


def _gaussian_logpdf(x: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log density of ``N(mean_i, cov)`` at ``x_i`` for each row."""
    values = multivariate_normal.logpdf(x - mean, mean=np.zeros(cov.shape[0]), cov=cov)
    return np.atleast_1d(np.asarray(values, dtype=float))


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """An MDP with finite state and action sets.

    Attributes:
        transitions (np.ndarray): ``P[a, s, s']``, shape ``(A, S, S)``.
        rewards (np.ndarray): ``r[s, a]``, shape ``(S, A)``.
        eta (np.ndarray): Initial state distribution, shape ``(S,)``.
        horizon (int): Number of steps per trajectory.
    """

    transitions: np.ndarray
    rewards: np.ndarray
    eta: np.ndarray
    horizon: int

    kind = MdpKind.TABULAR

    def __post_init__(self) -> None:
        """Validate shapes and stochasticity."""
        transitions = _stochastic(self.transitions, "transitions")
        if transitions.ndim != 3 or transitions.shape[1] != transitions.shape[2]:
            raise ValueError(f"transitions must have shape (A, S, S), got {transitions.shape}")
        n_actions, n_states, _ = transitions.shape
        rewards = np.array(self.rewards, dtype=float)
        if rewards.shape != (n_states, n_actions) or not np.all(np.isfinite(rewards)):
            raise ValueError(f"rewards must be a finite ({n_states}, {n_actions}) table")
        rewards.setflags(write=False)
        eta = _stochastic(self.eta, "eta")
        if eta.shape != (n_states,):
            raise ValueError(f"eta must have {n_states} entries")
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "eta", eta)

    @property
    def n_states(self) -> int:
        """``|S|``."""
        return int(self.transitions.shape[1])

    @property
    def n_actions(self) -> int:
        """``|A|``."""
        return int(self.transitions.shape[0])

    def sample_initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` initial states."""
        return rng.choice(self.n_states, size=n, p=self.eta)

    def initial_log_prob(self, states: np.ndarray) -> np.ndarray:
        """``log eta(s)`` per state."""
        with np.errstate(divide="ignore"):
            return np.log(self.eta[states])

    def reward(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """``r(s, a)`` per pair."""
        return self.rewards[states, actions]

    def step(self, states: np.ndarray, actions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sample next states by inverse CDF on each row ``P[a, s]``."""
        cumulative = np.cumsum(self.transitions[actions, states], axis=1)
        u = rng.random(len(states))[:, None]
        next_states = np.argmax(cumulative > u * cumulative[:, -1:], axis=1)
        return np.asarray(next_states)

    def transition_log_prob(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> np.ndarray:
        """``log P(s' | s, a)`` per triple."""
        with np.errstate(divide="ignore"):
            return np.log(self.transitions[actions, states, next_states])

    def with_transitions(self, transitions: np.ndarray) -> "TabularMdp":
        """A copy with another transition tensor."""
        return replace(self, transitions=transitions)

    def to_dict(self) -> dict[str, Any]:
        """JSON document accepted by :func:`mdp_from_dict`."""
        return {
            "kind": self.kind.value,
            "transitions": self.transitions.tolist(),
            "rewards": self.rewards.tolist(),
            "eta": self.eta.tolist(),
            "horizon": self.horizon,
        }


@dataclass(frozen=True, eq=False)
class LinearGaussianMdp:
    """``s' = A s + B a + N(0, noise_cov)`` with reward ``-(s' Q s + a' R a)``.

    Attributes:
        a_matrix (np.ndarray): State dynamics ``A``, ``(d, d)``.
        b_matrix (np.ndarray): Control matrix ``B``, ``(d, m)``.
        noise_cov (np.ndarray): Transition noise covariance, positive definite.
        reward_state (np.ndarray): ``Q``, ``(d, d)``.
        reward_action (np.ndarray): ``R``, ``(m, m)``.
        initial_mean (np.ndarray): Mean of the initial state.
        initial_cov (np.ndarray): Covariance of the initial state, positive definite.
        horizon (int): Number of steps per trajectory.
    """

    a_matrix: np.ndarray
    b_matrix: np.ndarray
    noise_cov: np.ndarray
    reward_state: np.ndarray
    reward_action: np.ndarray
    initial_mean: np.ndarray
    initial_cov: np.ndarray
    horizon: int

    kind = MdpKind.LINEAR_GAUSSIAN

    def __post_init__(self) -> None:
        """Validate shapes and definiteness."""
        a_matrix = np.atleast_2d(np.array(self.a_matrix, dtype=float))
        b_matrix = np.atleast_2d(np.array(self.b_matrix, dtype=float))
        d = a_matrix.shape[0]
        if a_matrix.shape != (d, d) or b_matrix.shape[0] != d:
            raise DimensionMismatchError("A must be (d, d) and B must be (d, m)")
        m = b_matrix.shape[1]
        reward_state = np.atleast_2d(np.array(self.reward_state, dtype=float))
        reward_action = np.atleast_2d(np.array(self.reward_action, dtype=float))
        if reward_state.shape != (d, d) or reward_action.shape != (m, m):
            raise DimensionMismatchError("reward_state must be (d, d) and reward_action (m, m)")
        initial_mean = np.array(self.initial_mean, dtype=float).ravel()
        if initial_mean.shape != (d,):
            raise DimensionMismatchError(f"initial_mean must have {d} entries")
        if self.horizon < 1:
            raise ValueError(f"horizon must be at least 1, got {self.horizon}")
        values = {
            "a_matrix": a_matrix,
            "b_matrix": b_matrix,
            "reward_state": reward_state,
            "reward_action": reward_action,
            "initial_mean": initial_mean,
            "noise_cov": _positive_definite(np.atleast_2d(self.noise_cov), "noise_cov"),
            "initial_cov": _positive_definite(np.atleast_2d(self.initial_cov), "initial_cov"),
        }
        for name, value in values.items():
            if value.shape[0] != d and name not in ("reward_action",):
                raise DimensionMismatchError(f"'{name}' does not match the state dimension {d}")
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def state_dim(self) -> int:
        """``d``."""
        return int(self.a_matrix.shape[0])

    @property
    def action_dim(self) -> int:
        """``m``."""
        return int(self.b_matrix.shape[1])

    def sample_initial(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` initial states, ``(n, d)``."""
        return rng.multivariate_normal(self.initial_mean, self.initial_cov, size=n)

    def initial_log_prob(self, states: np.ndarray) -> np.ndarray:
        """Log density of the initial states."""
        return _gaussian_logpdf(states, self.initial_mean, self.initial_cov)

    def reward(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """``-(s' Q s + a' R a)`` per pair."""
        state_cost = np.einsum("ni,ij,nj->n", states, self.reward_state, states)
        action_cost = np.einsum("ni,ij,nj->n", actions, self.reward_action, actions)
        return np.asarray(-(state_cost + action_cost))

    def mean_next(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """``A s + B a`` per pair."""
        return np.asarray(states @ self.a_matrix.T + actions @ self.b_matrix.T)

    def step(self, states: np.ndarray, actions: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Sample next states."""
        noise = rng.multivariate_normal(np.zeros(self.state_dim), self.noise_cov, size=len(states))
        return self.mean_next(states, actions) + noise

    def transition_log_prob(
        self, states: np.ndarray, actions: np.ndarray, next_states: np.ndarray
    ) -> np.ndarray:
        """``log P(s' | s, a)`` per triple."""
        return _gaussian_logpdf(next_states, self.mean_next(states, actions), self.noise_cov)

    def with_transitions(
        self, a_matrix: np.ndarray, b_matrix: np.ndarray, noise_cov: np.ndarray
    ) -> "LinearGaussianMdp":
        """A copy with other dynamics."""
        return replace(self, a_matrix=a_matrix, b_matrix=b_matrix, noise_cov=noise_cov)

    def to_dict(self) -> dict[str, Any]:
        """JSON document accepted by :func:`mdp_from_dict`."""
        return {
            "kind": self.kind.value,
            "A": self.a_matrix.tolist(),
            "B": self.b_matrix.tolist(),
            "noise_cov": self.noise_cov.tolist(),
            "reward_state": self.reward_state.tolist(),
            "reward_action": self.reward_action.tolist(),
            "initial_mean": self.initial_mean.tolist(),
            "initial_cov": self.initial_cov.tolist(),
            "horizon": self.horizon,
        }


Mdp = Union[TabularMdp, LinearGaussianMdp]


@dataclass(frozen=True, eq=False)
class TabularPolicy:
    """A stochastic policy ``pi(a | s)`` given as an ``(S, A)`` row-stochastic matrix."""

    probabilities: np.ndarray

    kind = MdpKind.TABULAR

    def __post_init__(self) -> None:
        """Validate the matrix."""
        probabilities = _stochastic(self.probabilities, "probabilities")
        if probabilities.ndim != 2:
            raise ValueError("probabilities must be an (S, A) matrix")
        object.__setattr__(self, "probabilities", probabilities)

    def sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one action per state."""
        cumulative = np.cumsum(self.probabilities[states], axis=1)
        u = rng.random(len(states))[:, None]
        return np.asarray(np.argmax(cumulative > u * cumulative[:, -1:], axis=1))

    def log_prob(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """``log pi(a | s)`` per pair."""
        with np.errstate(divide="ignore"):
            return np.log(self.probabilities[states, actions])

    def to_dict(self) -> dict[str, Any]:
        """JSON document accepted by :func:`policy_from_dict`."""
        return {"kind": self.kind.value, "probabilities": self.probabilities.tolist()}


@dataclass(frozen=True, eq=False)
class LinearGaussianPolicy:
    """``a = K s + N(0, noise_cov)``.

    Attributes:
        gain (np.ndarray): ``K``, shape ``(m, d)``.
        noise_cov (np.ndarray): Action noise covariance, positive definite.
    """

    gain: np.ndarray
    noise_cov: np.ndarray

    kind = MdpKind.LINEAR_GAUSSIAN

    def __post_init__(self) -> None:
        """Validate shapes."""
        gain = np.atleast_2d(np.array(self.gain, dtype=float))
        noise_cov = _positive_definite(np.atleast_2d(self.noise_cov), "noise_cov")
        if noise_cov.shape[0] != gain.shape[0]:
            raise DimensionMismatchError("noise_cov must be (m, m) for a gain of shape (m, d)")
        gain.setflags(write=False)
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "noise_cov", noise_cov)

    def sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one action per state, ``(n, m)``."""
        noise = rng.multivariate_normal(np.zeros(self.gain.shape[0]), self.noise_cov, size=len(states))
        return np.asarray(states @ self.gain.T + noise)

    def log_prob(self, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Log density of the actions."""
        return _gaussian_logpdf(actions, states @ self.gain.T, self.noise_cov)

    def to_dict(self) -> dict[str, Any]:
        """JSON document accepted by :func:`policy_from_dict`."""
        return {
            "kind": self.kind.value,
            "gain": self.gain.tolist(),
            "noise_cov": self.noise_cov.tolist(),
        }


Policy = Union[TabularPolicy, LinearGaussianPolicy]


def check_compatible(mdp: Mdp, policy: Policy) -> None:
    """Raise if the policy cannot act in the MDP.

    Raises:
        TypeError: If the kinds differ.
        DimensionMismatchError: If the state or action spaces differ.
    """
    if mdp.kind is not policy.kind:
        raise TypeError(f"A {policy.kind.value} policy cannot act in a {mdp.kind.value} MDP")
    if isinstance(mdp, TabularMdp) and isinstance(policy, TabularPolicy):
        if policy.probabilities.shape != (mdp.n_states, mdp.n_actions):
            raise DimensionMismatchError(
                f"Policy has shape {policy.probabilities.shape}, MDP has "
                f"{mdp.n_states} states and {mdp.n_actions} actions"
            )
    elif isinstance(mdp, LinearGaussianMdp) and isinstance(policy, LinearGaussianPolicy):
        if policy.gain.shape != (mdp.action_dim, mdp.state_dim):
            raise DimensionMismatchError(
                f"Policy gain has shape {policy.gain.shape}, expected "
                f"({mdp.action_dim}, {mdp.state_dim})"
            )


def corrupt_dynamics(mdp: TabularMdp, epsilon: float) -> TabularMdp:
    """Mix every transition row with the uniform distribution.

    Args:
        mdp (TabularMdp): The true MDP.
        epsilon (float): Weight of the uniform component, in ``[0, 1]``.

    Returns:
        TabularMdp: The MDP with ``(1 - epsilon) P + epsilon / S``.
    """
    if not isinstance(mdp, TabularMdp):
        raise TypeError("Only tabular dynamics can be corrupted")
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    mixed = (1.0 - epsilon) * mdp.transitions + epsilon / mdp.n_states
    return mdp.with_transitions(mixed / mixed.sum(axis=2, keepdims=True))


@dataclass(frozen=True, eq=False)
class ChainBenchmark:
    """A small MDP with a behaviour and an evaluation policy."""

    mdp: TabularMdp
    behavior: TabularPolicy
    evaluation: TabularPolicy


def four_state_chain(horizon: int = 4, slip: float = 0.2) -> ChainBenchmark:
    """Four states in a row; action 1 moves right, action 0 moves left.

    A move succeeds with probability ``1 - slip`` and otherwise leaves the state
    unchanged. Being in state 3 pays 1 and state 2 pays 0.5 per step. Episodes start
    in state 0 or 1. The behaviour policy is uniform and the evaluation policy moves
    right with probability 0.9.

    Args:
        horizon (int): Steps per episode.
        slip (float): Probability that a move fails.

    Returns:
        ChainBenchmark: The MDP and both policies.
    """
    n_states = 4
    transitions = np.zeros((2, n_states, n_states))
    for s in range(n_states):
        left, right = max(s - 1, 0), min(s + 1, n_states - 1)
        transitions[0, s, left] += 1.0 - slip
        transitions[0, s, s] += slip
        transitions[1, s, right] += 1.0 - slip
        transitions[1, s, s] += slip
    rewards = np.array([[0.0, 0.0], [0.0, 0.0], [0.5, 0.5], [1.0, 1.0]])
    mdp = TabularMdp(transitions, rewards, np.array([0.5, 0.5, 0.0, 0.0]), horizon)
    behavior = TabularPolicy(np.full((n_states, 2), 0.5))
    evaluation = TabularPolicy(np.tile([0.1, 0.9], (n_states, 1)))
    return ChainBenchmark(mdp, behavior, evaluation)


def mdp_from_dict(document: dict[str, Any]) -> Mdp:
    """Build an MDP from its JSON document.

    Tabular documents hold ``transitions`` ``(A, S, S)``, ``rewards`` ``(S, A)``,
    ``eta`` and ``horizon``. Linear-Gaussian documents hold ``A``, ``B``, ``noise_cov``,
    ``reward_state``, ``reward_action``, ``initial_mean``, ``initial_cov`` and ``horizon``.

    Raises:
        ConfigError: If the kind is unknown or a key is missing.
    """
    try:
        kind = MdpKind(document.get("kind"))
        if kind is MdpKind.TABULAR:
            return TabularMdp(
                transitions=np.asarray(document["transitions"]),
                rewards=np.asarray(document["rewards"]),
                eta=np.asarray(document["eta"]),
                horizon=int(document["horizon"]),
            )
        return LinearGaussianMdp(
            a_matrix=np.asarray(document["A"]),
            b_matrix=np.asarray(document["B"]),
            noise_cov=np.asarray(document["noise_cov"]),
            reward_state=np.asarray(document["reward_state"]),
            reward_action=np.asarray(document["reward_action"]),
            initial_mean=np.asarray(document["initial_mean"]),
            initial_cov=np.asarray(document["initial_cov"]),
            horizon=int(document["horizon"]),
        )
    except KeyError as e:
        raise ConfigError(f"MDP document is missing the key {e}") from e
    except ValueError as e:
        raise ConfigError(f"Invalid MDP document: {e}") from e


def policy_from_dict(document: dict[str, Any]) -> Policy:
    """Build a policy from its JSON document.

    Raises:
        ConfigError: If the kind is unknown or a key is missing.
    """
    try:
        kind = MdpKind(document.get("kind"))
        if kind is MdpKind.TABULAR:
            return TabularPolicy(np.asarray(document["probabilities"]))
        return LinearGaussianPolicy(
            gain=np.asarray(document["gain"]), noise_cov=np.asarray(document["noise_cov"])
        )
    except KeyError as e:
        raise ConfigError(f"Policy document is missing the key {e}") from e
    except ValueError as e:
        raise ConfigError(f"Invalid policy document: {e}") from e


def load_mdp(path: str | Path) -> Mdp:
    """Read an MDP from a JSON file; see :func:`mdp_from_dict`."""
    with open(path, encoding="utf-8") as infile:
        mdp = mdp_from_dict(json.load(infile))
    logger.info("Loaded %s MDP with horizon %d from %s", mdp.kind.value, mdp.horizon, path)
    return mdp


def load_policy(path: str | Path) -> Policy:
    """Read a policy from a JSON file; see :func:`policy_from_dict`."""
    with open(path, encoding="utf-8") as infile:
        return policy_from_dict(json.load(infile))
