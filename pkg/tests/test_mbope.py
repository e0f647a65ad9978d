import json

import numpy as np
import pytest

from lfiw_debias.mbope.dynamics import DynamicsModel
from lfiw_debias.mbope.dynamics import fit_dynamics
from lfiw_debias.mbope.environments import LinearGaussianMdp
from lfiw_debias.mbope.environments import LinearGaussianPolicy
from lfiw_debias.mbope.environments import TabularMdp
from lfiw_debias.mbope.environments import TabularPolicy
from lfiw_debias.mbope.environments import corrupt_dynamics
from lfiw_debias.mbope.environments import four_state_chain
from lfiw_debias.mbope.environments import load_mdp
from lfiw_debias.mbope.environments import mdp_from_dict
from lfiw_debias.mbope.environments import policy_from_dict
from lfiw_debias.mbope.experiment import OpeConfig
from lfiw_debias.mbope.experiment import TransitionWeightSource
from lfiw_debias.mbope.experiment import mean_absolute_errors
from lfiw_debias.mbope.experiment import run_ope_experiment
from lfiw_debias.mbope.rollouts import Rollouts
from lfiw_debias.mbope.rollouts import enumerate_trajectories
from lfiw_debias.mbope.rollouts import ground_truth_value
from lfiw_debias.mbope.rollouts import monte_carlo_value
from lfiw_debias.mbope.rollouts import rollout
from lfiw_debias.mbope.rollouts import trajectory_log_prob
from lfiw_debias.mbope.transitions import OracleTransitionWeights
from lfiw_debias.mbope.transitions import UnitTransitionWeights
from lfiw_debias.mbope.transitions import train_transition_classifier
from lfiw_debias.mbope.transitions import transition_features
from lfiw_debias.mbope.value import exact_lfiw_value
from lfiw_debias.mbope.value import horizon_sweep
from lfiw_debias.mbope.value import lfiw_value
from lfiw_debias.mbope.value import stepwise_lfiw_value
from lfiw_debias.mbope.value import trajectory_weight
from lfiw_debias.mbope.value import trajectory_weights
from lfiw_debias.ratio.classifier import Architecture
from lfiw_debias.ratio.classifier import TrainConfig
from lfiw_debias.utils.exceptions import ConfigError
from lfiw_debias.utils.exceptions import EmptyDataError
from lfiw_debias.utils.exceptions import SupportError


@pytest.fixture()
def chain():
    return four_state_chain()


@pytest.fixture()
def linear_mdp() -> LinearGaussianMdp:
    return LinearGaussianMdp(
        a_matrix=[[0.8]],
        b_matrix=[[0.5]],
        noise_cov=[[0.1]],
        reward_state=[[1.0]],
        reward_action=[[0.1]],
        initial_mean=[0.0],
        initial_cov=[[1.0]],
        horizon=5,
    )


def test_tabular_mdp_validation() -> None:
    with pytest.raises(ValueError):
        TabularMdp(np.full((1, 2, 2), 0.7), np.zeros((2, 1)), [0.5, 0.5], horizon=2)
    with pytest.raises(ValueError):
        TabularMdp(np.full((1, 2, 2), 0.5), np.zeros((2, 1)), [0.5, 0.5], horizon=0)
    with pytest.raises(ValueError):
        TabularPolicy(np.array([[0.2, 0.2]]))


def test_mdp_documents_round_trip(chain, linear_mdp, tmp_path) -> None:
    path = tmp_path / "mdp.json"
    path.write_text(json.dumps(chain.mdp.to_dict()))
    loaded = load_mdp(path)
    assert np.array_equal(loaded.transitions, chain.mdp.transitions)
    assert mdp_from_dict(linear_mdp.to_dict()).state_dim == 1
    assert policy_from_dict(chain.evaluation.to_dict()).probabilities.shape == (4, 2)
    with pytest.raises(ConfigError):
        mdp_from_dict({"kind": "tabular", "rewards": [[0.0]]})
    with pytest.raises(ConfigError):
        policy_from_dict({"kind": "quantum"})


def test_ground_truth_matches_enumeration(chain) -> None:
    trajectories = enumerate_trajectories(chain.mdp, chain.evaluation)
    probabilities = np.exp(trajectories.log_probs)
    assert probabilities.sum() == pytest.approx(1.0)
    truth = ground_truth_value(chain.mdp, chain.evaluation)
    assert float(probabilities @ trajectories.returns) == pytest.approx(truth)
    assert truth > ground_truth_value(chain.mdp, chain.behavior)


def test_enumeration_size_limit(chain) -> None:
    with pytest.raises(ValueError):
        enumerate_trajectories(chain.mdp, chain.evaluation, horizon=5)


def test_monte_carlo_agrees_with_the_exact_value(chain) -> None:
    estimate = monte_carlo_value(chain.mdp, chain.evaluation, 20_000, seed=1)
    truth = ground_truth_value(chain.mdp, chain.evaluation)
    assert abs(estimate.value - truth) < 5 * estimate.stderr
    assert estimate.n_traj == 20_000


def test_rollout_log_probs_factorise(chain) -> None:
    batch = rollout(chain.mdp, chain.behavior, 5, seed=2)
    assert batch.states.shape == (5, 5)
    assert batch.actions.shape == (5, 4)
    for trajectory in batch:
        assert trajectory_log_prob(chain.mdp, chain.behavior, trajectory) == pytest.approx(
            trajectory.log_prob
        )
    again = rollout(chain.mdp, chain.behavior, 5, seed=2)
    assert np.array_equal(batch.states, again.states)


def test_rollout_rejects_mismatched_policy(chain, linear_mdp) -> None:
    with pytest.raises(TypeError):
        rollout(linear_mdp, chain.behavior, 3)
    with pytest.raises(ValueError):
        rollout(chain.mdp, chain.behavior, 0)


def test_tabular_fit_uses_laplace_smoothing(chain) -> None:
    data = Rollouts(
        states=np.array([[0, 1]]),
        actions=np.array([[1]]),
        rewards=np.array([[0.0]]),
        log_probs=np.array([0.0]),
    )
    model = fit_dynamics(data, chain.mdp)
    assert model.mdp.transitions[1, 0].tolist() == pytest.approx([0.2, 0.4, 0.2, 0.2])
    assert model.mdp.transitions[0, 3].tolist() == pytest.approx([0.25] * 4)
    assert model.n_transitions == 1
    with pytest.raises(ConfigError):
        fit_dynamics(data, chain.mdp, smoothing=0.0)
    with pytest.raises(ConfigError):
        fit_dynamics(data, chain.mdp, ensemble_size=0)


def test_bagged_tabular_fit(chain) -> None:
    data = rollout(chain.mdp, chain.behavior, 50, seed=3)
    model = fit_dynamics(data, chain.mdp, ensemble_size=3, seed=3)
    assert len(model.members) == 3
    assert np.allclose(model.mdp.transitions.sum(axis=2), 1.0)


def test_fit_needs_transitions(chain) -> None:
    empty = Rollouts(
        states=np.zeros((0, 2), dtype=int),
        actions=np.zeros((0, 1), dtype=int),
        rewards=np.zeros((0, 1)),
        log_probs=np.zeros(0),
    )
    with pytest.raises(EmptyDataError):
        fit_dynamics(empty, chain.mdp)


def test_linear_fit_recovers_the_dynamics(linear_mdp) -> None:
    policy = LinearGaussianPolicy(gain=[[-0.3]], noise_cov=[[1.0]])
    data = rollout(linear_mdp, policy, 500, seed=4)
    assert data.states.shape == (500, 6, 1)
    model = fit_dynamics(data, linear_mdp)
    assert model.mdp.a_matrix[0, 0] == pytest.approx(0.8, abs=0.05)
    assert model.mdp.b_matrix[0, 0] == pytest.approx(0.5, abs=0.05)
    assert model.mdp.noise_cov[0, 0] == pytest.approx(0.1, abs=0.02)
    with pytest.raises(ConfigError):
        fit_dynamics(data, linear_mdp, ensemble_size=2)


def test_transition_features(chain, linear_mdp) -> None:
    one_hot = transition_features(chain.mdp, np.array([0]), np.array([1]), np.array([1]))
    assert one_hot.shape == (1, 32)
    assert one_hot.argmax() == 5
    states = np.ones((2, 1))
    stacked = transition_features(linear_mdp, states, 2 * states, 3 * states)
    assert stacked.tolist() == [[1.0, 2.0, 3.0]] * 2


def test_oracle_weights_of_a_perfect_model_are_one(chain) -> None:
    batch = rollout(chain.mdp, chain.evaluation, 50, seed=5)
    weights = OracleTransitionWeights(chain.mdp, chain.mdp)
    assert np.allclose(trajectory_weights(batch, weights), 1.0)
    estimate = lfiw_value(chain.mdp, chain.evaluation, weights, 50, rollouts=batch)
    assert estimate.value == pytest.approx(batch.returns.mean())


def test_oracle_weights_need_model_support(chain) -> None:
    blocked = chain.mdp.transitions.copy()
    blocked[1, 0] = [0.0, 1.0, 0.0, 0.0]
    model = chain.mdp.with_transitions(blocked)
    weights = OracleTransitionWeights(chain.mdp, model)
    with pytest.raises(SupportError):
        weights(np.array([0]), np.array([1]), np.array([0]))


def test_zero_weighting_horizon_gives_unit_weights(chain) -> None:
    batch = rollout(chain.mdp, chain.evaluation, 10, seed=6)
    model = corrupt_dynamics(chain.mdp, 0.5)
    weights = OracleTransitionWeights(chain.mdp, model)
    assert trajectory_weights(batch, weights, 0).tolist() == [1.0] * 10
    assert trajectory_weight(batch[0], weights, 0) == 1.0
    with pytest.raises(ConfigError):
        trajectory_weights(batch, weights, 5)


def test_corrupt_dynamics(chain) -> None:
    uniform = corrupt_dynamics(chain.mdp, 1.0)
    assert np.allclose(uniform.transitions, 0.25)
    assert np.allclose(corrupt_dynamics(chain.mdp, 0.0).transitions, chain.mdp.transitions)
    with pytest.raises(ValueError):
        corrupt_dynamics(chain.mdp, 1.5)


def test_exact_weighted_value_recovers_the_truth(chain) -> None:
    model = corrupt_dynamics(chain.mdp, 0.3)
    truth = ground_truth_value(chain.mdp, chain.evaluation)
    assert exact_lfiw_value(chain.mdp, model, chain.evaluation) == pytest.approx(truth)
    model_value = ground_truth_value(model, chain.evaluation)
    assert exact_lfiw_value(chain.mdp, model, chain.evaluation, weight_horizon=0) == pytest.approx(
        model_value
    )
    assert abs(model_value - truth) > 0.05


def test_horizon_sweep_starts_at_the_model_estimate(chain) -> None:
    model = corrupt_dynamics(chain.mdp, 0.3)
    batch = rollout(model, chain.evaluation, 200, seed=7)
    weights = OracleTransitionWeights(chain.mdp, model)
    truth = ground_truth_value(chain.mdp, chain.evaluation)
    curve = horizon_sweep(model, chain.evaluation, weights, 200, [0, 2, 4], truth=truth, rollouts=batch)
    assert len(curve) == 3
    assert curve.estimates[0].value == pytest.approx(batch.returns.mean())
    frame = curve.to_frame()
    assert list(frame.columns) == ["H", "value", "stderr", "delta"]
    assert frame["delta"].iloc[0] == pytest.approx(truth - batch.returns.mean())
    with pytest.raises(ConfigError):
        horizon_sweep(model, chain.evaluation, weights, 200, [0, 9], rollouts=batch)


def test_stepwise_unit_weights_give_the_mean_return(chain) -> None:
    batch = rollout(chain.mdp, chain.evaluation, 40, seed=8)
    estimate = stepwise_lfiw_value(chain.mdp, chain.evaluation, UnitTransitionWeights(), 40, rollouts=batch)
    assert estimate.value == pytest.approx(batch.returns.mean())
    assert estimate.effective_sample_size == pytest.approx(40.0)


def test_ope_config() -> None:
    config = OpeConfig.from_dict({"weights": "oracle", "weight_horizons": [0, 2]})
    assert config.weights is TransitionWeightSource.ORACLE
    assert config.to_dict()["weight_horizons"] == [0, 2]
    with pytest.raises(ConfigError):
        OpeConfig.from_dict({"H": [1]})
    with pytest.raises(ConfigError):
        OpeConfig(corruption=2.0)


def test_ope_experiment_with_oracle_weights() -> None:
    config = OpeConfig(
        n_traj=2000, n_data_traj=100, weights="oracle", corruption=0.3, seed=9, n_truth_traj=10
    )
    result = run_ope_experiment(config)
    frame = result.to_frame()
    assert frame["H"].tolist() == [0, 1, 2, 3, 4]
    full = result.curve.estimates[-1]
    assert abs(full.value - result.truth) < 5 * full.stderr + 0.05
    assert abs(result.curve.errors[-1]) < abs(result.curve.errors[0])
    summary = result.summary()
    assert summary["model_estimate"] == pytest.approx(result.model_estimate)
    assert set(mean_absolute_errors([result])) == {"first_horizon", "last_horizon", "stepwise"}


def test_ope_experiment_needs_both_policies(chain) -> None:
    with pytest.raises(ConfigError):
        run_ope_experiment(OpeConfig(n_data_traj=10), chain.mdp, chain.behavior, None)


@pytest.mark.slow
def test_ope_experiment_with_learned_weights() -> None:
    config = OpeConfig(n_traj=200, n_data_traj=200, epochs=20, weight_horizons=(0, 4), seed=10)
    result = run_ope_experiment(config)
    assert len(result.curve) == 2
    assert np.isfinite(result.curve.estimates[-1].value)
    assert np.isfinite(result.stepwise.value)


TRANSITION_LOGISTIC = TrainConfig(
    architecture=Architecture.LOGISTIC, learning_rate=0.05, epochs=20, l2_penalty=1e-3, seed=12
)


def test_transition_classifier_is_near_chance_for_exact_dynamics(chain) -> None:
    data = rollout(chain.mdp, chain.behavior, 1000, seed=11)
    exact = DynamicsModel(chain.mdp, (chain.mdp,), 4000)
    clf = train_transition_classifier(data, exact, TRANSITION_LOGISTIC)
    assert clf.gamma == 1.0
    probabilities = clf.predict_proba(*data.transitions())
    assert np.mean(np.abs(probabilities - 0.5)) <= 0.05


def test_transition_classifier_separates_wrong_successors(chain) -> None:
    wrong = np.zeros_like(chain.mdp.transitions)
    for s in range(4):
        # (s + 2) % 4 is never a true successor in the chain
        wrong[:, s, (s + 2) % 4] = 1.0
    model = DynamicsModel(chain.mdp.with_transitions(wrong), (), 1200)
    data = rollout(chain.mdp, chain.behavior, 300, seed=13)
    clf = train_transition_classifier(data, model, TRANSITION_LOGISTIC)
    states, actions, next_states = data.transitions()
    real = clf.predict_proba(states, actions, next_states)
    generated = clf.predict_proba(states, actions, (states + 2) % 4)
    accuracy = (np.sum(real > 0.5) + np.sum(generated < 0.5)) / (real.size + generated.size)
    assert accuracy >= 0.95


def test_transition_classifier_needs_transitions(chain) -> None:
    empty = Rollouts(
        states=np.zeros((0, 2), dtype=int),
        actions=np.zeros((0, 1), dtype=int),
        rewards=np.zeros((0, 1)),
        log_probs=np.zeros(0),
    )
    with pytest.raises(EmptyDataError):
        train_transition_classifier(empty, DynamicsModel(chain.mdp, (chain.mdp,), 0), TRANSITION_LOGISTIC)


def test_stepwise_and_trajectory_weighting_agree_at_horizon_one(chain) -> None:
    rewards = np.array([[0.2, 1.0], [0.4, 0.0], [0.5, 0.5], [1.0, 1.0]])
    mdp = TabularMdp(chain.mdp.transitions, rewards, chain.mdp.eta, horizon=1)
    model = corrupt_dynamics(mdp, 0.3)
    batch = rollout(model, chain.evaluation, 300, seed=9)
    weights = OracleTransitionWeights(mdp, model)
    assert np.ptp(trajectory_weights(batch, weights)) > 0
    assert np.ptp(batch.rewards) > 0
    for self_normalize in (True, False):
        stepwise = stepwise_lfiw_value(
            model, chain.evaluation, weights, 300, rollouts=batch, self_normalize=self_normalize
        )
        trajectory = lfiw_value(
            model,
            chain.evaluation,
            weights,
            300,
            weight_horizon=1,
            rollouts=batch,
            self_normalize=self_normalize,
        )
        assert stepwise.value == pytest.approx(trajectory.value)
        assert stepwise.stderr == pytest.approx(trajectory.stderr)
