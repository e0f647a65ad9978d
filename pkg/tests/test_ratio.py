import json
import math

import numpy as np
import pytest
from scipy.stats import norm

from lfiw_debias.ratio.calibration import calibration_report
from lfiw_debias.ratio.calibration import reliability_bins
from lfiw_debias.ratio.classifier import Architecture
from lfiw_debias.ratio.classifier import ClassifierEnsemble
from lfiw_debias.ratio.classifier import ProbClassifier
from lfiw_debias.ratio.classifier import TrainConfig
from lfiw_debias.ratio.classifier import importance_weight
from lfiw_debias.ratio.classifier import importance_weights
from lfiw_debias.ratio.classifier import log_importance_weights
from lfiw_debias.ratio.classifier import parameter_count
from lfiw_debias.ratio.classifier import train_classifier
from lfiw_debias.ratio.classifier import train_ensemble
from lfiw_debias.ratio.datasets import LabeledRatioDataset
from lfiw_debias.ratio.datasets import load_points
from lfiw_debias.ratio.datasets import load_ratio_dataset
from lfiw_debias.ratio.oracle import bayes_optimal_classifier
from lfiw_debias.utils.exceptions import ConfigError
from lfiw_debias.utils.exceptions import DimensionMismatchError
from lfiw_debias.utils.exceptions import EmptyDataError
from lfiw_debias.utils.exceptions import SupportError


@pytest.fixture()
def shifted_gaussians() -> LabeledRatioDataset:
    """Data from N(1, 1) against model samples from N(-1, 1); the log ratio is 2x."""
    rng = np.random.default_rng(12)
    return LabeledRatioDataset(
        positives=rng.normal(1.0, 1.0, size=(400, 1)),
        negatives=rng.normal(-1.0, 1.0, size=(400, 1)),
    )


LOGISTIC = TrainConfig(architecture=Architecture.LOGISTIC, learning_rate=0.05, epochs=60, seed=3)


def test_dataset_gamma_defaults_to_class_ratio() -> None:
    dataset = LabeledRatioDataset(np.zeros((4, 2)), np.ones((6, 2)))
    assert dataset.gamma == 1.5
    assert len(dataset) == 10
    points, labels = dataset.features_and_labels()
    assert points.shape == (10, 2)
    assert labels.tolist() == [1.0] * 4 + [0.0] * 6


def test_dataset_validation() -> None:
    with pytest.raises(EmptyDataError):
        LabeledRatioDataset(np.zeros((0, 1)), np.zeros((3, 1)))
    with pytest.raises(DimensionMismatchError):
        LabeledRatioDataset(np.zeros((3, 1)), np.zeros((3, 2)))
    with pytest.raises(ValueError):
        LabeledRatioDataset(np.zeros((3, 1)), np.zeros((3, 1)), gamma=-1.0)


def test_split_keeps_classes_and_recomputes_gamma() -> None:
    dataset = LabeledRatioDataset(np.arange(10.0), np.arange(20.0))
    train, holdout = dataset.split(0.2, np.random.default_rng(0))
    assert (len(train.positives), len(train.negatives)) == (8, 16)
    assert (len(holdout.positives), len(holdout.negatives)) == (2, 4)
    assert holdout.gamma == 2.0
    merged = np.sort(np.concatenate([train.positives[:, 0], holdout.positives[:, 0]]))
    assert merged.tolist() == list(np.arange(10.0))
    with pytest.raises(EmptyDataError):
        LabeledRatioDataset(np.zeros(2), np.zeros(2)).split(0.2, np.random.default_rng(0))


def test_load_points_from_csv_and_jsonl(tmp_path) -> None:
    csv_path = tmp_path / "points.csv"
    csv_path.write_text("x0,x1\n1,2\n3,4\n")
    jsonl_path = tmp_path / "points.jsonl"
    jsonl_path.write_text('{"features": [1, 2]}\n\n{"features": [3, 4]}\n')
    assert load_points(csv_path).tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert load_points(jsonl_path).tolist() == [[1.0, 2.0], [3.0, 4.0]]

    dataset = load_ratio_dataset(csv_path, jsonl_path, gamma=2.0)
    assert dataset.gamma == 2.0

    ragged = tmp_path / "ragged.jsonl"
    ragged.write_text('{"features": [1]}\n{"features": [1, 2]}\n')
    with pytest.raises(DimensionMismatchError):
        load_points(ragged)


def test_parameter_count() -> None:
    assert parameter_count(Architecture.LOGISTIC, 3) == 4
    assert parameter_count(Architecture.MLP, 3, 5) == 3 * 5 + 2 * 5 + 1


def test_importance_weight_of_fixed_classifier() -> None:
    clf = ProbClassifier.logistic([0.0], math.log(4.0))
    assert clf.predict_proba(np.array([0.0])) == pytest.approx(0.8)
    assert importance_weight(clf, 1.0, np.array([0.0])) == pytest.approx(4.0)
    assert importance_weight(clf, 0.5, np.array([0.0])) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        importance_weight(clf, 0.0, np.array([0.0]))
    with pytest.raises(DimensionMismatchError):
        clf.predict_proba(np.zeros((2, 3)))


def test_probabilities_are_clamped() -> None:
    clf = ProbClassifier.logistic([1000.0])
    probabilities = clf.predict_proba(np.array([[1.0], [-1.0]]))
    assert 0 < probabilities.min() and probabilities.max() < 1
    weights = importance_weights(clf, 1.0, np.array([[1.0], [-1.0]]))
    assert np.all(np.isfinite(weights))
    assert np.allclose(log_importance_weights(clf, 1.0, [[1.0], [-1.0]]), np.log(weights))


def test_classifier_serialization(tmp_path) -> None:
    clf = ProbClassifier.logistic([1.0, -2.0], 0.5)
    path = tmp_path / "clf.json"
    clf.save(path)
    loaded = ProbClassifier.load(path)
    points = np.array([[0.3, 0.1], [-1.0, 2.0]])
    assert np.array_equal(loaded.predict_proba(points), clf.predict_proba(points))
    with pytest.raises(ValueError):
        ProbClassifier.from_dict({**clf.to_dict(), "format_version": 99})


def test_train_config_from_dict() -> None:
    config = TrainConfig.from_dict({"architecture": "logistic", "epochs": 5})
    assert config.architecture is Architecture.LOGISTIC
    assert TrainConfig.from_dict(config.to_dict()) == config
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"epoch": 5})
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0.0)


def test_training_is_deterministic(shifted_gaussians) -> None:
    first = train_classifier(shifted_gaussians, LOGISTIC)
    second = train_classifier(shifted_gaussians, LOGISTIC)
    assert np.array_equal(first.weights, second.weights)
    assert first.training_loss == second.training_loss
    other = train_classifier(shifted_gaussians, TrainConfig.from_dict({**LOGISTIC.to_dict(), "seed": 4}))
    assert not np.array_equal(first.weights, other.weights)


def test_logistic_classifier_recovers_log_ratio(shifted_gaussians) -> None:
    clf = train_classifier(shifted_gaussians, LOGISTIC)
    slope, bias = clf.weights
    assert 1.2 < slope < 2.8
    assert abs(bias) < 0.5
    assert clf.training_loss < math.log(2.0)


def test_identical_classes_give_chance_predictions() -> None:
    points = np.random.default_rng(5).normal(size=(200, 1))
    dataset = LabeledRatioDataset(points, points.copy())
    config = TrainConfig(
        architecture=Architecture.LOGISTIC, learning_rate=0.05, epochs=100, batch_size=400, seed=3
    )
    clf = train_classifier(dataset, config)
    assert np.max(np.abs(clf.predict_proba(points) - 0.5)) <= 0.05


def test_separable_classes_give_confident_predictions() -> None:
    rng = np.random.default_rng(6)
    positives = rng.normal(10.0, 1.0, size=(100, 1))
    negatives = rng.normal(-10.0, 1.0, size=(100, 1))
    clf = train_classifier(LabeledRatioDataset(positives, negatives), LOGISTIC)
    assert np.all(clf.predict_proba(positives) > 0.99)
    assert np.all(clf.predict_proba(negatives) < 0.01)


def test_mlp_classifier_trains(shifted_gaussians) -> None:
    config = TrainConfig(hidden_units=8, epochs=30, learning_rate=0.02, seed=1)
    clf = train_classifier(shifted_gaussians, config)
    assert clf.hidden_activations(np.zeros((3, 1))).shape == (3, 8)
    probabilities = clf.predict_proba(np.array([[-2.0], [2.0]]))
    assert probabilities[0] < 0.5 < probabilities[1]


def test_ensemble_averages_member_weights() -> None:
    a = ProbClassifier.logistic([0.0], math.log(4.0))
    b = ProbClassifier.logistic([0.0], 0.0)
    ensemble = ClassifierEnsemble((a, b), gamma=1.0)
    assert ensemble(np.zeros((2, 1))).tolist() == pytest.approx([2.5, 2.5])
    assert ensemble.predict_proba(np.zeros((1, 1)))[0] == pytest.approx(0.65)
    restored = ClassifierEnsemble.from_dict(json.loads(json.dumps(ensemble.to_dict())))
    assert np.allclose(restored(np.zeros((1, 1))), 2.5)
    single = ClassifierEnsemble.from_dict(a.to_dict())
    assert single(np.zeros((1, 1)))[0] == pytest.approx(4.0)
    assert single.log_weights(np.zeros((1, 1)))[0] == pytest.approx(math.log(4.0))
    with pytest.raises(ValueError):
        ClassifierEnsemble(())
    with pytest.raises(DimensionMismatchError):
        ClassifierEnsemble((a, ProbClassifier.logistic([0.0, 0.0])))


def test_train_ensemble_uses_distinct_member_seeds(shifted_gaussians) -> None:
    ensemble = train_ensemble(shifted_gaussians, LOGISTIC, n_classifiers=2)
    assert len(ensemble.classifiers) == 2
    assert not np.array_equal(ensemble.classifiers[0].weights, ensemble.classifiers[1].weights)
    assert ensemble.gamma == shifted_gaussians.gamma
    with pytest.raises(ConfigError):
        train_ensemble(shifted_gaussians, LOGISTIC, n_classifiers=0)


def test_reliability_bins() -> None:
    report = reliability_bins(np.array([0.1, 0.9, 0.95]), np.array([0, 1, 1]), n_bins=10)
    assert report.counts.tolist() == [0, 1, 0, 0, 0, 0, 0, 0, 0, 2]
    assert report.ece == pytest.approx((0.1 + 2 * 0.075) / 3)
    assert report.mce == pytest.approx(0.1)
    assert list(report.to_frame().columns) == ["bin_low", "bin_high", "mean_conf", "frac_pos", "count"]
    assert reliability_bins(np.array([1.0]), np.array([1]), n_bins=4).counts[-1] == 1
    with pytest.raises(EmptyDataError):
        reliability_bins(np.array([]), np.array([]))
    with pytest.raises(ValueError):
        reliability_bins(np.array([0.5]), np.array([1]), n_bins=1)


def test_two_bins_split_at_one_half() -> None:
    report = reliability_bins(np.array([0.2, 0.5, 0.7]), np.array([0, 1, 0]), n_bins=2)
    assert report.counts.tolist() == [1, 2]
    assert report.bin_edges.tolist() == [0.0, 0.5, 1.0]
    assert report.ece == pytest.approx((0.2 + 2 * 0.1) / 3)


def test_bayes_optimal_classifier_is_calibrated() -> None:
    rng = np.random.default_rng(5)
    holdout = LabeledRatioDataset(rng.normal(1.0, 1.0, (5000, 1)), rng.normal(-1.0, 1.0, (5000, 1)))
    oracle = bayes_optimal_classifier(
        lambda x: norm.pdf(np.asarray(x)[:, 0], 1.0, 1.0),
        lambda x: norm.pdf(np.asarray(x)[:, 0], -1.0, 1.0),
    )
    report = calibration_report(oracle, holdout)
    assert report.ece < 0.05
    x = np.array([[0.5]])
    assert oracle.implied_weight(x)[0] == pytest.approx(math.exp(1.0))


def test_bayes_optimal_classifier_support() -> None:
    oracle = bayes_optimal_classifier(lambda x: 0.75, lambda x: 0.25, gamma=3.0)
    assert oracle(0) == pytest.approx(0.5)
    assert oracle.implied_weight(0) == pytest.approx(3.0)
    with pytest.raises(SupportError):
        bayes_optimal_classifier(lambda x: 1.0, lambda x: 0.0)(0)
    with pytest.raises(TypeError):
        bayes_optimal_classifier(lambda x: 1.0)
