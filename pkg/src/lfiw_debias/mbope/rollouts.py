"""Trajectory simulation, exact enumeration and ground-truth policy values."""

import itertools
import logging
from collections.abc import Iterator
from dataclasses import dataclass
from typing import Any
from typing import Union

import numpy as np

from ..utils.exceptions import EmptyDataError
from ..utils.seeding import derive_rng
from .environments import LinearGaussianMdp
from .environments import Mdp
from .environments import Policy
from .environments import TabularMdp
from .environments import TabularPolicy
from .environments import check_compatible

logger = logging.getLogger(__name__)

MAX_ENUMERATION_PAIRS = 12
MAX_ENUMERATION_HORIZON = 4


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One episode.

    Attributes:
        states (np.ndarray): ``s_0 .. s_T``.
        actions (np.ndarray): ``a_0 .. a_{T-1}``.
        rewards (np.ndarray): ``r(s_t, a_t)`` for ``t < T``.
        log_prob (float): Log probability (density) of the episode under the generating process.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log_prob: float

    @property
    def horizon(self) -> int:
        """Number of transitions."""
        return len(self.actions)

    @property
    def episode_return(self) -> float:
        """``R(tau)``, the sum of rewards."""
        return float(np.sum(self.rewards))


@dataclass(frozen=True, eq=False)
class Rollouts:
    """A batch of equal-length trajectories stored as stacked arrays.

    Tabular batches hold ``states`` of shape ``(n, T + 1)`` and ``actions`` of shape
    ``(n, T)``; linear-Gaussian batches carry a trailing feature axis.

    Attributes:
        states (np.ndarray): States per trajectory and step.
        actions (np.ndarray): Actions per trajectory and step.
        rewards (np.ndarray): Rewards, shape ``(n, T)``.
        log_probs (np.ndarray): Log probability of each trajectory, shape ``(n,)``.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    log_probs: np.ndarray

    def __post_init__(self) -> None:
        """Check that the arrays line up."""
        n, horizon = self.rewards.shape
        if self.states.shape[:2] != (n, horizon + 1) or self.actions.shape[:2] != (n, horizon):
            raise ValueError(
                f"Inconsistent rollout shapes: states {self.states.shape}, "
                f"actions {self.actions.shape}, rewards {self.rewards.shape}"
            )
        if self.log_probs.shape != (n,):
            raise ValueError(f"Expected {n} log probabilities, got {self.log_probs.shape}")
        for array in (self.states, self.actions, self.rewards, self.log_probs):
            array.setflags(write=False)

    def __len__(self) -> int:
        """Number of trajectories."""
        return int(self.rewards.shape[0])

    def __getitem__(self, index: int) -> Trajectory:
        """The trajectory at ``index``."""
        return Trajectory(
            states=self.states[index],
            actions=self.actions[index],
            rewards=self.rewards[index],
            log_prob=float(self.log_probs[index]),
        )

    def __iter__(self) -> Iterator[Trajectory]:
        """Iterate over the trajectories."""
        return (self[i] for i in range(len(self)))

    @property
    def horizon(self) -> int:
        """``T``."""
        return int(self.rewards.shape[1])

    @property
    def returns(self) -> np.ndarray:
        """``R(tau)`` per trajectory."""
        return np.asarray(self.rewards.sum(axis=1))

    def step(self, t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The ``(s_t, a_t, s_{t+1})`` triples of step ``t`` across the batch."""
        return self.states[:, t], self.actions[:, t], self.states[:, t + 1]

    def transitions(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """All triples, flattened over trajectories and steps (trajectory-major)."""
        n, horizon = len(self), self.horizon
        states = self.states[:, :-1].reshape(n * horizon, *self.states.shape[2:])
        actions = self.actions.reshape(n * horizon, *self.actions.shape[2:])
        next_states = self.states[:, 1:].reshape(n * horizon, *self.states.shape[2:])
        return states, actions, next_states


def as_mdp(env: Any) -> Mdp:
    """The MDP itself, or the ``mdp`` of a dynamics model."""
    mdp = getattr(env, "mdp", env)
    if not isinstance(mdp, (TabularMdp, LinearGaussianMdp)):
        raise TypeError(f"Expected an MDP or a dynamics model, got {type(env).__name__}")
    return mdp


def rollout(
    env: Union[Mdp, Any],
    policy: Policy,
    n_traj: int,
    horizon: int | None = None,
    seed: int = 0,
    stream: str = "rollout",
) -> Rollouts:
    """Simulate ``n_traj`` trajectories of a policy.

    The log probability of each trajectory is accumulated along the way as
    ``log eta(s_0) + sum_t [log pi(a_t | s_t) + log P(s_{t+1} | s_t, a_t)]``.

    Args:
        env (Mdp | DynamicsModel): True dynamics, or a learned model rolled out through its ``mdp``.
        policy (Policy): Policy choosing the actions.
        n_traj (int): Number of trajectories.
        horizon (int | None): Steps per trajectory; the MDP's horizon by default.
        seed (int): Root seed.
        stream (str): Seed stream name.

    Returns:
        Rollouts: The simulated batch.

    Raises:
        TypeError: If the policy and MDP kinds differ.
    """
    mdp = as_mdp(env)
    check_compatible(mdp, policy)
    if n_traj < 1:
        raise ValueError(f"n_traj must be positive, got {n_traj}")
    horizon = mdp.horizon if horizon is None else horizon
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    rng = derive_rng(seed, stream)

    state = mdp.sample_initial(n_traj, rng)
    log_probs = np.asarray(mdp.initial_log_prob(state), dtype=float).copy()
    states = [state]
    actions, rewards = [], []
    for _ in range(horizon):
        action = policy.sample(state, rng)
        next_state = mdp.step(state, action, rng)
        rewards.append(mdp.reward(state, action))
        log_probs += policy.log_prob(state, action)  # type: ignore[arg-type]
        log_probs += mdp.transition_log_prob(state, action, next_state)  # type: ignore[arg-type]
        actions.append(action)
        states.append(next_state)
        state = next_state

    logger.info("Rolled out %d trajectories of length %d", n_traj, horizon)
    return Rollouts(
        states=np.stack(states, axis=1),
        actions=np.stack(actions, axis=1),
        rewards=np.stack(rewards, axis=1).astype(float),
        log_probs=log_probs,
    )


def trajectory_log_prob(mdp: Mdp, policy: Policy, trajectory: Trajectory) -> float:
    """Log probability of a trajectory from the factorisation over its steps."""
    check_compatible(mdp, policy)
    states = np.asarray(trajectory.states)
    actions = np.asarray(trajectory.actions)
    total = float(mdp.initial_log_prob(states[:1])[0])  # type: ignore[arg-type]
    for t in range(trajectory.horizon):
        s, a, s_next = states[t : t + 1], actions[t : t + 1], states[t + 1 : t + 2]
        total += float(policy.log_prob(s, a)[0])  # type: ignore[arg-type]
        total += float(mdp.transition_log_prob(s, a, s_next)[0])  # type: ignore[arg-type]
    return total


def enumerate_trajectories(
    mdp: TabularMdp, policy: TabularPolicy, horizon: int | None = None
) -> Rollouts:
    """Every trajectory with positive probability, with its exact log probability.

    Only small problems are accepted: ``|S| |A| <= 12`` and ``T <= 4``.

    Args:
        mdp (TabularMdp): The dynamics to enumerate.
        policy (TabularPolicy): The acting policy.
        horizon (int | None): Steps per trajectory; the MDP's horizon by default.

    Returns:
        Rollouts: One row per trajectory; ``exp(log_probs)`` sums to one.
    """
    if not isinstance(mdp, TabularMdp) or not isinstance(policy, TabularPolicy):
        raise TypeError("Enumeration needs a tabular MDP and policy")
    check_compatible(mdp, policy)
    horizon = mdp.horizon if horizon is None else horizon
    if mdp.n_states * mdp.n_actions > MAX_ENUMERATION_PAIRS or horizon > MAX_ENUMERATION_HORIZON:
        raise ValueError(
            f"Enumeration is limited to |S||A| <= {MAX_ENUMERATION_PAIRS} and "
            f"T <= {MAX_ENUMERATION_HORIZON}, got {mdp.n_states * mdp.n_actions} and {horizon}"
        )

    state = np.flatnonzero(mdp.eta > 0)
    states, actions, rewards = state[:, None], np.zeros((state.size, 0), dtype=int), np.zeros((state.size, 0))
    log_probs = np.log(mdp.eta[state])
    pairs = np.array(list(itertools.product(range(mdp.n_actions), range(mdp.n_states))))
    for _ in range(horizon):
        current = np.repeat(states[:, -1], len(pairs))
        action = np.tile(pairs[:, 0], len(states))
        next_state = np.tile(pairs[:, 1], len(states))
        step_prob = policy.probabilities[current, action] * mdp.transitions[action, current, next_state]
        keep = step_prob > 0
        parent = np.repeat(np.arange(len(states)), len(pairs))[keep]
        states = np.column_stack([states[parent], next_state[keep]])
        actions = np.column_stack([actions[parent], action[keep]])
        rewards = np.column_stack([rewards[parent], mdp.rewards[current[keep], action[keep]]])
        log_probs = log_probs[parent] + np.log(step_prob[keep])

    logger.debug("Enumerated %d trajectories of length %d", len(states), horizon)
    return Rollouts(states=states, actions=actions, rewards=rewards, log_probs=log_probs)


def ground_truth_value(mdp: TabularMdp, policy: TabularPolicy) -> float:
    """Exact value ``E[R(tau)]`` by backward dynamic programming over the horizon.

    Args:
        mdp (TabularMdp): A tabular MDP.
        policy (TabularPolicy): The policy to evaluate.

    Returns:
        float: The expected undiscounted return from ``eta``.

    Raises:
        TypeError: For linear-Gaussian inputs; use :func:`monte_carlo_value` instead.

    Examples:
        >>> import numpy as np
        >>> mdp = TabularMdp(np.ones((1, 1, 1)), np.ones((1, 1)), np.ones(1), horizon=3)
        >>> ground_truth_value(mdp, TabularPolicy(np.ones((1, 1))))
        3.0
    """
    if not isinstance(mdp, TabularMdp) or not isinstance(policy, TabularPolicy):
        raise TypeError("Exact evaluation needs a tabular MDP; use monte_carlo_value otherwise")
    check_compatible(mdp, policy)
    value = np.zeros(mdp.n_states)
    for _ in range(mdp.horizon):
        # q[s, a] = r(s, a) + sum_s' P(s' | s, a) V(s')
        q = mdp.rewards + np.einsum("ast,t->sa", mdp.transitions, value)
        value = np.sum(policy.probabilities * q, axis=1)
    return float(mdp.eta @ value)


@dataclass(frozen=True)
class ValueEstimate:
    """A policy value estimate.

    Attributes:
        value (float): The estimate.
        stderr (float): Standard error over the weighted summands.
        effective_sample_size (float): Effective number of trajectories.
        n_traj (int): Number of trajectories used.
    """

    value: float
    stderr: float
    effective_sample_size: float
    n_traj: int

    def to_dict(self) -> dict[str, Any]:
        """Plain dictionary of the fields."""
        return {
            "value": self.value,
            "stderr": self.stderr,
            "effective_sample_size": self.effective_sample_size,
            "n_traj": self.n_traj,
        }


def monte_carlo_value(
    mdp: Mdp, policy: Policy, n_traj: int, seed: int = 0, horizon: int | None = None
) -> ValueEstimate:
    """Mean return of ``n_traj`` rollouts in the true MDP, for any MDP kind."""
    returns = rollout(mdp, policy, n_traj, horizon=horizon, seed=seed).returns
    if returns.size == 0:
        raise EmptyDataError("No trajectories were simulated")
    stderr = float(returns.std(ddof=1) / np.sqrt(returns.size)) if returns.size > 1 else 0.0
    return ValueEstimate(
        value=float(returns.mean()),
        stderr=stderr,
        effective_sample_size=float(returns.size),
        n_traj=int(returns.size),
    )
