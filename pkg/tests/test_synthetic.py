import math

import numpy as np
import pytest

from lfiw_debias.estimators.weights import WeightConfig
from lfiw_debias.synthetic.augmentation import AugmentConfig
from lfiw_debias.synthetic.augmentation import AugmentedTask
from lfiw_debias.synthetic.augmentation import ContaminationOracle
from lfiw_debias.synthetic.augmentation import DownstreamClassifier
from lfiw_debias.synthetic.augmentation import WeightScheme
from lfiw_debias.synthetic.augmentation import example_weights
from lfiw_debias.synthetic.augmentation import make_contaminated_task
from lfiw_debias.synthetic.augmentation import rank_generated_by_weight
from lfiw_debias.synthetic.augmentation import run_augmentation_experiment
from lfiw_debias.synthetic.augmentation import train_downstream_classifier
from lfiw_debias.synthetic.augmentation import weighted_augmented_risk
from lfiw_debias.synthetic.fig1 import Fig1Config
from lfiw_debias.synthetic.fig1 import run_fig1_experiment
from lfiw_debias.synthetic.gaussians import MomentMatchedGaussian
from lfiw_debias.synthetic.gaussians import analytic_bayes_curve
from lfiw_debias.synthetic.gaussians import fig1_grid
from lfiw_debias.synthetic.gaussians import fig1_target
from lfiw_debias.synthetic.gaussians import fit_moment_matched
from lfiw_debias.utils.exceptions import ConfigError
from lfiw_debias.utils.exceptions import DimensionMismatchError
from lfiw_debias.utils.exceptions import EmptyDataError
from lfiw_debias.utils.exceptions import NumericalError


def test_target_moments_and_grid() -> None:
    target = fig1_target()
    assert target.mean == pytest.approx(0.0)
    assert target.variance == pytest.approx(1.25)
    grid = fig1_grid()
    assert grid.size == 161
    assert (grid[0], grid[-1]) == (-4.0, 4.0)


def test_moment_matching() -> None:
    model = fit_moment_matched([-1.0, 1.0])
    assert (model.mean, model.std) == (0.0, 1.0)
    with pytest.raises(NumericalError):
        fit_moment_matched([2.0, 2.0])


def test_bayes_curve_prefers_the_modes() -> None:
    model = MomentMatchedGaussian(0.0, math.sqrt(1.25))
    curve = analytic_bayes_curve(fig1_target(), model, 1.0, [0.0, 1.0, -1.0])
    assert curve[0] < 0.5
    assert curve[1] > 0.5
    assert curve[2] == pytest.approx(curve[1])


def test_fig1_config_validation() -> None:
    with pytest.raises(ConfigError):
        Fig1Config(n_per_class=5)
    with pytest.raises(ConfigError):
        Fig1Config.from_dict({"n": 100})
    assert Fig1Config.from_dict({"n_per_class": 50}).train_config().hidden_units == 100


def test_fig1_experiment_is_reproducible() -> None:
    config = Fig1Config(n_per_class=200, epochs=10, seed=2)
    result = run_fig1_experiment(config)
    frame = result.to_frame()
    assert list(frame.columns) == ["x", "c_hat", "c_opt", "band_lo", "band_hi"]
    assert len(frame) == 161
    assert frame["band_lo"].isna().all()
    assert np.all((result.c_hat > 0) & (result.c_hat < 1))
    assert result.gamma == 1.0
    assert set(result.summary()) == {
        "mean_abs_gap",
        "gamma",
        "model_mean",
        "model_std",
        "training_loss",
    }
    again = run_fig1_experiment(config)
    assert np.array_equal(result.c_hat, again.c_hat)


@pytest.mark.slow
def test_fig1_bootstrap_band() -> None:
    result = run_fig1_experiment(Fig1Config(n_per_class=100, epochs=5, n_bootstrap=3, threads=2))
    assert np.all(result.band_lo <= result.band_hi)
    assert np.all((result.band_lo > 0) & (result.band_hi < 1))


def test_augmented_task_validation() -> None:
    points = np.zeros((2, 2))
    with pytest.raises(ConfigError):
        AugmentedTask(points, [0, 1], points, [0, 1], mixture_m=2.0)
    with pytest.raises(ValueError):
        AugmentedTask(points, [0, 2], points, [0, 1])
    with pytest.raises(EmptyDataError):
        AugmentedTask(points, [0, 1], np.zeros((0, 2)), [], mixture_m=0.5)
    with pytest.raises(DimensionMismatchError):
        AugmentedTask(points, [0, 1], np.zeros((2, 3)), [0, 1])
    task = AugmentedTask(points, [0, 1], points, [1, 1])
    assert task.generated_joint()[:, -1].tolist() == [1.0, 1.0]
    assert task.with_m(1.0).mixture_m == 1.0


def test_example_weights_split_the_risk() -> None:
    task = AugmentedTask(np.zeros((2, 1)), [0, 1], np.zeros((4, 1)), [0, 1, 0, 1], mixture_m=0.25)
    real, generated = example_weights(task, None, WeightConfig())
    assert real.tolist() == [0.125, 0.125]
    assert generated.tolist() == pytest.approx([0.1875] * 4)
    _, normalized = example_weights(task, lambda rows: np.arange(1.0, 5.0), WeightConfig(self_normalize=True))
    assert normalized.sum() == pytest.approx(0.75)


def test_uniform_classifier_risk_is_log_two() -> None:
    task = AugmentedTask(np.ones((3, 2)), [0, 1, 1], np.ones((5, 2)), [1, 0, 0, 1, 1])
    uniform = DownstreamClassifier.zeros(2, 2)
    assert uniform.predict_proba(np.ones((1, 2))).tolist() == [[0.5, 0.5]]
    assert weighted_augmented_risk(task, uniform, None, WeightConfig()) == pytest.approx(math.log(2))
    with pytest.raises(DimensionMismatchError):
        uniform.logits(np.ones((1, 3)))


def test_training_lowers_the_risk() -> None:
    toy = make_contaminated_task(n_real=40, n_generated=100, n_test=10, flip_fraction=0.0, seed=1)
    config = WeightConfig()
    clf = train_downstream_classifier(toy.task, None, config, epochs=100)
    start = weighted_augmented_risk(toy.task, DownstreamClassifier.zeros(2, 2), None, config)
    assert weighted_augmented_risk(toy.task, clf, None, config) < start
    with pytest.raises(ConfigError):
        train_downstream_classifier(toy.task, None, config, epochs=0)


def test_contamination_oracle() -> None:
    oracle = ContaminationOracle(flip_fraction=0.3)
    rows = np.array([[-2.0, 0.0, 0.0], [2.0, 0.0, 1.0], [-2.0, 0.0, 1.0]])
    weights = oracle(rows)
    assert weights[0] == pytest.approx(1 / 0.7)
    assert weights[1] == pytest.approx(1.0, abs=1e-3)
    assert weights[2] < 0.01


def test_contaminated_task_flips_only_class_zero() -> None:
    toy = make_contaminated_task(n_real=10, n_generated=400, n_test=20, flip_fraction=0.5, seed=3)
    assert toy.flipped.any()
    assert np.all(toy.task.generated_labels[toy.flipped] == 1)
    assert len(toy.test_points) == 20
    with pytest.raises(ConfigError):
        make_contaminated_task(flip_fraction=1.0)


def test_rank_generated_by_weight_keeps_tie_order() -> None:
    order = rank_generated_by_weight(np.zeros((4, 1)), lambda rows: np.array([1.0, 2.0, 1.0, 2.0]))
    assert order.tolist() == [1, 3, 0, 2]


def test_augment_config() -> None:
    config = AugmentConfig.from_dict({"weights": "oracle", "mixture_m": 0.2})
    assert config.weights is WeightScheme.ORACLE
    assert config.to_dict()["weights"] == "oracle"
    with pytest.raises(ConfigError):
        AugmentConfig.from_dict({"m": 0.2})
    with pytest.raises(ValueError):
        AugmentConfig(weights="learned")


def test_oracle_weights_push_flipped_points_to_the_bottom() -> None:
    result = run_augmentation_experiment(
        AugmentConfig(weights=WeightScheme.ORACLE, n_generated=500, n_test=500, seed=4)
    )
    assert result.bottom_decile_flipped_share > 0.9
    assert 0.5 < result.accuracy <= 1.0
    assert result.effective_sample_size < 500
    assert result.to_dict()["weights"] == "oracle"


@pytest.mark.slow
def test_learned_weights_run_end_to_end() -> None:
    result = run_augmentation_experiment(
        AugmentConfig(weights=WeightScheme.LFIW, n_generated=200, n_test=200, epochs=20, seed=5)
    )
    assert 0.0 <= result.accuracy <= 1.0
    assert np.isfinite(result.test_cross_entropy)
