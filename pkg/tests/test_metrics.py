import math

import numpy as np
import pytest

from lfiw_debias.estimators.weights import WeightConfig
from lfiw_debias.metrics.extractors import HiddenLayerExtractor
from lfiw_debias.metrics.extractors import IdentityExtractor
from lfiw_debias.metrics.extractors import RandomProjectionExtractor
from lfiw_debias.metrics.features import FeatureSet
from lfiw_debias.metrics.features import LabelDistribution
from lfiw_debias.metrics.features import load_features
from lfiw_debias.metrics.features import load_weights
from lfiw_debias.metrics.scores import debiased_metric_suite
from lfiw_debias.metrics.scores import frechet_distance
from lfiw_debias.metrics.scores import inception_style_score
from lfiw_debias.metrics.scores import kernel_distance
from lfiw_debias.metrics.scores import trace_sqrt_product
from lfiw_debias.ratio.classifier import Architecture
from lfiw_debias.ratio.classifier import ProbClassifier
from lfiw_debias.utils.exceptions import DimensionMismatchError
from lfiw_debias.utils.exceptions import EmptyDataError
from lfiw_debias.utils.exceptions import NumericalError


def test_inception_style_score_bounds() -> None:
    assert inception_style_score(LabelDistribution(np.eye(3))) == pytest.approx(3.0)
    uniform = LabelDistribution(np.full((4, 2), 0.5))
    assert inception_style_score(uniform) == pytest.approx(1.0)
    confident = LabelDistribution(np.eye(2))
    assert inception_style_score(confident.with_weights([3.0, 1.0])) < 2.0
    # a row with mass on a class the weighted marginal never sees
    with pytest.raises(NumericalError):
        inception_style_score(confident.with_weights([1.0, 0.0]))


def test_label_distribution_validation() -> None:
    assert LabelDistribution.from_logits([[0.0, 0.0]]).rows.tolist() == [[0.5, 0.5]]
    with pytest.raises(ValueError):
        LabelDistribution(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        LabelDistribution(np.array([[1.0]]))
    with pytest.raises(NumericalError):
        LabelDistribution(np.eye(2), weights=[0.0, 0.0])


def test_weighted_moments() -> None:
    features = FeatureSet(np.array([[0.0], [2.0]]), weights=[3.0, 1.0])
    mean, covariance = features.mean_and_covariance()
    assert mean.tolist() == [0.5]
    assert covariance[0, 0] == pytest.approx(0.75)
    with pytest.raises(EmptyDataError):
        FeatureSet(np.array([[1.0]])).mean_and_covariance()
    with pytest.raises(ValueError):
        FeatureSet(np.zeros((2, 1)), weights=[1.0])


def test_trace_sqrt_product_of_diagonal_matrices() -> None:
    assert trace_sqrt_product(np.diag([4.0, 1.0]), np.diag([1.0, 9.0])) == pytest.approx(5.0)


def test_frechet_distance_known_value() -> None:
    s = FeatureSet(np.array([[-1.0], [1.0]]))
    r = FeatureSet(np.array([[0.0], [2.0]]))
    assert frechet_distance(s, r) == pytest.approx(1.0)
    assert frechet_distance(s, s) == pytest.approx(0.0, abs=1e-10)
    with pytest.raises(DimensionMismatchError):
        frechet_distance(s, FeatureSet(np.zeros((2, 2))))


def test_weights_act_like_duplicated_rows() -> None:
    rng = np.random.default_rng(0)
    rows = rng.normal(size=(5, 2))
    real = FeatureSet(rng.normal(size=(6, 2)))
    weighted = FeatureSet(rows, weights=[2.0, 1.0, 1.0, 1.0, 1.0])
    duplicated = FeatureSet(np.vstack([rows[:1], rows]))
    assert frechet_distance(weighted, real) == pytest.approx(frechet_distance(duplicated, real))


def test_kernel_distance_grows_with_shift() -> None:
    rng = np.random.default_rng(1)
    base = FeatureSet(rng.normal(size=(200, 2)))
    near = FeatureSet(rng.normal(size=(200, 2)))
    far = FeatureSet(rng.normal(3.0, 1.0, size=(200, 2)))
    assert kernel_distance(base, far) > kernel_distance(base, near)
    assert abs(kernel_distance(base, near)) < 0.05
    with pytest.raises(ValueError):
        kernel_distance(base, near, bandwidth=0.0)
    with pytest.raises(EmptyDataError):
        kernel_distance(FeatureSet(np.zeros((1, 2))), near)


def _double_loop_kernel_distance(s, r, w_s, w_r, bandwidth=1.0) -> float:
    def k(a, b):
        return math.exp(-float(np.sum((a - b) ** 2)) / (2.0 * bandwidth**2))

    def within(rows, w):
        total = mass = 0.0
        for i in range(len(rows)):
            for j in range(len(rows)):
                if i != j:
                    total += w[i] * w[j] * k(rows[i], rows[j])
                    mass += w[i] * w[j]
        return total / mass

    cross = sum(w_s[i] * w_r[j] * k(s[i], r[j]) for i in range(len(s)) for j in range(len(r)))
    return within(s, w_s) + within(r, w_r) - 2.0 * cross / (sum(w_s) * sum(w_r))


def test_kernel_distance_matches_a_double_loop() -> None:
    rng = np.random.default_rng(7)
    s_rows = rng.normal(size=(50, 2))
    r_rows = rng.normal(0.5, 1.0, size=(40, 2))
    ones_s, ones_r = np.ones(50), np.ones(40)
    expected = _double_loop_kernel_distance(s_rows, r_rows, ones_s, ones_r)
    assert kernel_distance(FeatureSet(s_rows), FeatureSet(r_rows)) == pytest.approx(expected, abs=1e-12)

    w_s = rng.uniform(0.1, 3.0, size=50)
    expected = _double_loop_kernel_distance(s_rows, r_rows, w_s, ones_r, bandwidth=2.0)
    actual = kernel_distance(FeatureSet(s_rows, weights=w_s), FeatureSet(r_rows), bandwidth=2.0)
    assert actual == pytest.approx(expected, abs=1e-12)


def test_kernel_distance_of_a_set_with_itself() -> None:
    rows = np.random.default_rng(8).normal(size=(30, 3))
    value = kernel_distance(FeatureSet(rows), FeatureSet(rows))
    assert -2.0 / 29 <= value <= 1e-9


def test_unit_weights_leave_metrics_unchanged() -> None:
    rng = np.random.default_rng(2)
    model = FeatureSet(rng.normal(size=(100, 3)))
    real = FeatureSet(rng.normal(0.5, 1.0, size=(100, 3)))
    suite = debiased_metric_suite(model, real, None, WeightConfig())
    assert suite.fid_lfiw == pytest.approx(suite.fid_raw)
    assert suite.kid_lfiw == pytest.approx(suite.kid_raw)
    assert suite.is_lfiw == pytest.approx(suite.is_raw)
    assert suite.effective_sample_size == pytest.approx(100.0)
    assert set(suite.to_dict()) == {
        "is_raw",
        "is_lfiw",
        "fid_raw",
        "fid_lfiw",
        "kid_raw",
        "kid_lfiw",
        "effective_sample_size",
    }


def test_oracle_weights_reduce_the_distances() -> None:
    rng = np.random.default_rng(3)
    shift = np.array([0.5, 0.5])
    model = rng.normal(size=(1500, 2))
    real = rng.normal(size=(1500, 2)) + shift

    def oracle(points):
        return np.exp(points @ shift - shift @ shift / 2.0)

    suite = debiased_metric_suite(
        FeatureSet(model), FeatureSet(real), oracle, WeightConfig(self_normalize=True)
    )
    assert suite.fid_lfiw < suite.fid_raw / 2
    assert suite.kid_lfiw < suite.kid_raw
    assert suite.effective_sample_size < 1500


def test_metric_suite_uses_separate_model_points() -> None:
    features = FeatureSet(np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]))
    points = np.array([[10.0], [20.0], [30.0]])
    seen = []

    def weight_fn(inputs):
        seen.append(np.asarray(inputs).copy())
        return np.ones(len(inputs))

    debiased_metric_suite(features, features, weight_fn, WeightConfig(), model_points=points)
    assert seen[0].tolist() == points.tolist()


def test_extractors() -> None:
    points = np.arange(6.0).reshape(3, 2)
    assert IdentityExtractor()(points).tolist() == points.tolist()
    projection = RandomProjectionExtractor(input_dim=2, out_dim=4, seed=1)
    assert projection(points).shape == (3, 4)
    assert np.array_equal(projection.matrix, RandomProjectionExtractor(2, 4, seed=1).matrix)
    assert not np.array_equal(projection.matrix, RandomProjectionExtractor(2, 4, seed=2).matrix)
    mlp = ProbClassifier(
        architecture=Architecture.MLP, input_dim=2, weights=np.linspace(-1, 1, 13), hidden_units=3
    )
    assert HiddenLayerExtractor(mlp)(points).shape == (3, 3)
    with pytest.raises(ValueError):
        RandomProjectionExtractor(input_dim=0, out_dim=1)


def test_load_features_and_weights(tmp_path) -> None:
    features = tmp_path / "features.csv"
    features.write_text("f0,f1\n1,2\n3,4\n")
    weights = tmp_path / "weights.csv"
    weights.write_text("index,weight\n0,0.5\n1,2\n")
    assert load_features(features).tolist() == [[1.0, 2.0], [3.0, 4.0]]
    assert load_weights(weights).tolist() == [0.5, 2.0]
