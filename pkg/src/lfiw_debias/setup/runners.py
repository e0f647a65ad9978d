"""Runners turning an :class:`ExperimentConfig` into artifacts and a manifest.

Each runner is a pure function of the config and its input files returning the
artifact bytes by file name; :func:`run` writes them and the manifest.
"""

import json
import logging
import time
from collections.abc import Callable
from dataclasses import replace
from typing import Any

import numpy as np
import pandas as pd

from ..estimators.bias_variance import bias_variance_decompose
from ..estimators.bootstrap import BootstrapConfig
from ..estimators.bootstrap import BootstrapMode
from ..estimators.bootstrap import bootstrap_ci
from ..estimators.weights import WeightConfig
from ..estimators.weights import WeightedBatch
from ..estimators.weights import estimate_from_values
from ..estimators.weights import transform_weights
from ..mbope.environments import load_mdp
from ..mbope.environments import load_policy
from ..mbope.experiment import OpeConfig
from ..mbope.experiment import run_ope_experiment
from ..metrics.features import FeatureSet
from ..metrics.features import LabelDistribution
from ..metrics.features import load_features
from ..metrics.features import load_weights
from ..metrics.scores import debiased_metric_suite
from ..ratio.calibration import calibration_report
from ..ratio.classifier import ClassifierEnsemble
from ..ratio.classifier import TrainConfig
from ..ratio.classifier import train_ensemble
from ..ratio.datasets import LabeledRatioDataset
from ..ratio.datasets import load_points
from ..ratio.datasets import load_ratio_dataset
from ..resample.diagnostics import exact_delta_kl
from ..resample.diagnostics import exact_kl_diagnostics
from ..resample.diagnostics import kl_diagnostics
from ..resample.distributions import DiscreteDistributionPair
from ..resample.distributions import empirical_frequencies
from ..resample.distributions import random_triple
from ..resample.distributions import total_variation
from ..resample.sir import ResampledModel
from ..resample.sir import exact_partition
from ..resample.sir import sir_histogram
from ..resample.sir import sir_sample_many
from ..synthetic.augmentation import AugmentConfig
from ..synthetic.augmentation import run_augmentation_experiment
from ..synthetic.fig1 import Fig1Config
from ..synthetic.fig1 import run_fig1_experiment
from ..synthetic.gaussians import fig1_target
from ..synthetic.gaussians import fit_moment_matched
from ..utils.exceptions import ConfigError
from ..utils.exceptions import DimensionMismatchError
from ..utils.functions import atomic_write_bytes
from ..utils.functions import format_timespan
from ..utils.functions import frame_to_csv_bytes
from ..utils.functions import to_json_bytes
from ..utils.seeding import derive_rng
from ..utils.seeding import recording_streams
from .config import BiasVarianceParams
from .config import Command
from .config import EstimateParams
from .config import ExperimentConfig
from .config import MetricsParams
from .config import ResampleParams
from .config import TrainRatioParams
from .manifest import RunManifest
from .manifest import digest_outputs
from .manifest import package_version

logger = logging.getLogger(__name__)

Artifacts = dict[str, bytes]


def _input(config: ExperimentConfig, key: str) -> str:
    try:
        return config.inputs[key]
    except KeyError as e:
        raise ConfigError(f"{config.command.value} needs the input '{key}'") from e


def _seeded(train: TrainConfig, seed: int) -> TrainConfig:
    return TrainConfig.from_dict({**train.to_dict(), "seed": seed})


def _fixed_weights(values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    return lambda _: values


def run_train_ratio(config: ExperimentConfig, params: TrainRatioParams) -> Artifacts:
    """Train a classifier ensemble and report its calibration on held-out points."""
    dataset = load_ratio_dataset(_input(config, "positives"), _input(config, "negatives"), params.gamma)
    train_set, holdout = dataset.split(params.holdout_fraction, derive_rng(config.seed, "split"))
    ensemble = train_ensemble(train_set, _seeded(params.train, config.seed), params.n_classifiers)
    ensemble = replace(ensemble, gamma=dataset.gamma)
    report = calibration_report(ensemble.predict_proba, holdout, params.n_bins)
    summary = {
        "gamma": ensemble.gamma,
        "n_train": len(train_set),
        "n_holdout": len(holdout),
        "training_loss": [clf.training_loss for clf in ensemble.classifiers],
        "calibration": report.to_dict(),
    }
    return {
        "classifier.json": to_json_bytes(ensemble.to_dict()),
        "calibration.csv": frame_to_csv_bytes(report.to_frame()),
        "report.json": to_json_bytes(summary),
    }


def run_estimate(config: ExperimentConfig, params: EstimateParams) -> Artifacts:
    """Importance weighted estimate of a statistic of model samples."""
    dataset: LabeledRatioDataset | None = None
    if "positives" in config.inputs and "negatives" in config.inputs:
        dataset = load_ratio_dataset(config.inputs["positives"], config.inputs["negatives"])
    samples_path = config.inputs.get("samples") or config.inputs.get("negatives")
    if samples_path is None:
        raise ConfigError("estimate needs the input 'samples' (or 'negatives')")
    samples = load_points(samples_path)
    if params.column >= samples.shape[1]:
        raise DimensionMismatchError(
            f"column {params.column} does not exist in samples of dimension {samples.shape[1]}"
        )

    train = _seeded(params.train, config.seed)
    if "weights" in config.inputs:
        raw = load_weights(config.inputs["weights"])
        if raw.size != len(samples):
            raise DimensionMismatchError(f"Got {raw.size} weights for {len(samples)} samples")
    else:
        if "classifier" in config.inputs:
            ensemble = ClassifierEnsemble.load(config.inputs["classifier"])
        elif dataset is not None:
            ensemble = train_ensemble(dataset, train, params.n_classifiers)
        else:
            raise ConfigError("estimate needs 'weights', 'classifier' or 'positives' and 'negatives'")
        if params.gamma is not None:
            ensemble = replace(ensemble, gamma=params.gamma)
        raw = ensemble(samples)

    values = samples[:, params.column]
    if params.statistic == "second_moment":
        values = values**2
    weight_config = params.weight_config()
    weighted = estimate_from_values(values, raw, weight_config)
    unweighted = estimate_from_values(values, np.ones(len(values)), WeightConfig(), warn_low_ess=False)
    artifacts = {
        "estimate.json": to_json_bytes(
            {
                "statistic": params.statistic,
                "column": params.column,
                "estimator": weight_config.label,
                "weighted": weighted.to_dict(),
                "unweighted": unweighted.to_dict(),
            }
        ),
        "weights.csv": frame_to_csv_bytes(
            pd.DataFrame({"raw": raw, "transformed": transform_weights(raw, weight_config)})
        ),
    }

    if params.bootstrap_n:
        if dataset is None:
            raise ConfigError("Bootstrap intervals need the inputs 'positives' and 'negatives'")
        negatives = dataset.negatives

        def resample_negatives(n: int, rng: np.random.Generator) -> np.ndarray:
            return negatives[rng.integers(0, len(negatives), size=n)]

        boot = BootstrapConfig(
            n_resamples=params.bootstrap_n,
            confidence=params.confidence,
            mode=BootstrapMode.EMPIRICAL,
            seed=config.seed,
            threads=config.effective_threads,
        )
        interval = bootstrap_ci(dataset, resample_negatives, samples, train, boot)
        artifacts["bootstrap.csv"] = frame_to_csv_bytes(interval.to_frame())
    return artifacts


def run_resample(config: ExperimentConfig, params: ResampleParams) -> Artifacts:
    """SIR draws from a discrete pair with exact and estimated KL diagnostics."""
    if "pair" in config.inputs:
        with open(config.inputs["pair"], encoding="utf-8") as infile:
            document = json.load(infile)
        try:
            pair = DiscreteDistributionPair.from_dict(document)
        except KeyError as e:
            raise ConfigError(f"The pair file is missing the key {e}") from e
        weights = np.asarray(document["weights"], dtype=float) if "weights" in document else pair.oracle_weights()
    else:
        pair, weights = random_triple(derive_rng(config.seed, "data"), params.k)
    weight_fn = pair.weight_fn(weights)

    model = ResampledModel(pair.sample_model, weight_fn, params.particles)
    draws = sir_sample_many(model, params.draws, config.seed, params.chunk_size)
    histogram = sir_histogram(draws, pair, weights)
    exact = exact_kl_diagnostics(pair, weights)

    reported = exact
    estimated = None
    if np.all(weights > 0):
        real = pair.sample_target(params.diagnostic_samples, derive_rng(config.seed, "data", 1))
        fake = pair.sample_model(params.diagnostic_samples, derive_rng(config.seed, "negatives"))
        estimated = kl_diagnostics(real, fake, weight_fn)
        reported = estimated
    else:
        logger.warning("Some weights are zero; reporting exact diagnostics only")

    frequencies = empirical_frequencies(draws, pair.k)
    diagnostics = {
        "delta_estimate": reported.delta_estimate,
        "nec1_gap": reported.nec1_gap,
        "nec2_gap": reported.nec2_gap,
        "verdict": reported.verdict,
        "estimated": None if estimated is None else estimated.to_dict(),
        "exact": exact.to_dict(),
        "exact_delta_kl": exact_delta_kl(pair, weights),
        "partition": exact_partition(pair, weights),
        "tv_to_resampled": total_variation(frequencies, pair.induced_distribution(weights)),
        "pair": pair.to_dict(),
        "weights": weights,
        "particles": params.particles,
        "draws": params.draws,
    }
    return {
        "histogram.csv": frame_to_csv_bytes(histogram),
        "diagnostics.json": to_json_bytes(diagnostics),
    }


def run_metrics(config: ExperimentConfig, params: MetricsParams) -> Artifacts:
    """Raw and importance weighted sample quality metrics from feature files."""
    model = load_features(_input(config, "model_features"))
    real = load_features(_input(config, "real_features"))
    weight_fn: Callable[[np.ndarray], Any] | None = None
    points: Any = None
    if "weights" in config.inputs:
        given = load_weights(config.inputs["weights"])
        if given.size != len(model):
            raise DimensionMismatchError(f"Got {given.size} weights for {len(model)} model samples")

        weight_fn = _fixed_weights(given)
    elif "classifier" in config.inputs:
        weight_fn = ClassifierEnsemble.load(config.inputs["classifier"])
        if "model_points" in config.inputs:
            points = load_points(config.inputs["model_points"])
    labels = None
    if "model_logits" in config.inputs:
        labels = LabelDistribution.from_logits(load_features(config.inputs["model_logits"]))

    suite = debiased_metric_suite(
        FeatureSet(model),
        FeatureSet(real),
        weight_fn,
        params.weight_config(),
        model_labels=labels,
        model_points=points,
        bandwidth=params.bandwidth,
    )
    return {"metrics.json": to_json_bytes(suite.to_dict())}


def run_fig1(config: ExperimentConfig, params: Fig1Config) -> Artifacts:
    """Trained against optimal classifier probabilities on a grid."""
    result = run_fig1_experiment(params)
    return {
        "fig1.csv": frame_to_csv_bytes(result.to_frame()),
        "summary.json": to_json_bytes(result.summary()),
    }


def run_augment(config: ExperimentConfig, params: AugmentConfig) -> Artifacts:
    """Downstream accuracy with weighted generated data."""
    result = run_augmentation_experiment(params)
    return {"augment.json": to_json_bytes({**result.to_dict(), "mixture_m": params.mixture_m})}


def run_ope(config: ExperimentConfig, params: OpeConfig) -> Artifacts:
    """Off-policy evaluation curve over weighting horizons."""
    given = [key for key in ("env", "behavior", "eval") if key in config.inputs]
    if given and len(given) != 3:
        raise ConfigError("ope needs all of 'env', 'behavior' and 'eval', or none for the bundled chain")
    if given:
        result = run_ope_experiment(
            params,
            load_mdp(config.inputs["env"]),
            load_policy(config.inputs["behavior"]),
            load_policy(config.inputs["eval"]),
        )
    else:
        result = run_ope_experiment(params)
    return {
        "ope.csv": frame_to_csv_bytes(result.to_frame()),
        "summary.json": to_json_bytes(result.summary()),
    }


def run_bias_variance(config: ExperimentConfig, params: BiasVarianceParams) -> Artifacts:
    """Bias-variance comparison of estimator variants on the bimodal Gaussian toy."""
    target = fig1_target()
    real = target.sample(params.n_per_class, derive_rng(config.seed, "data"))
    model = fit_moment_matched(real)
    fake = model.sample(params.n_per_class, derive_rng(config.seed, "negatives"))
    ensemble = train_ensemble(
        LabeledRatioDataset(real, fake), TrainConfig(epochs=params.epochs, seed=config.seed)
    )

    def trial(rng: np.random.Generator) -> WeightedBatch:
        points = model.sample(params.batch_size, rng)
        return WeightedBatch.from_raw(points, ensemble(points), WeightConfig())

    reports = bias_variance_decompose(
        params.estimator_configs(),
        [("mean", lambda x: x[:, 0]), ("second_moment", lambda x: x[:, 0] ** 2)],
        [target.mean, target.second_moment],
        trial,
        params.n_trials,
        config.seed,
    )
    frame = pd.concat([report.to_frame() for report in reports], ignore_index=True)
    summary = {report.config.label: report.summary() for report in reports}
    return {
        "bias_variance.csv": frame_to_csv_bytes(frame),
        "summary.json": to_json_bytes(summary),
    }


RUNNERS: dict[Command, Callable[[ExperimentConfig, Any], Artifacts]] = {
    Command.TRAIN_RATIO: run_train_ratio,
    Command.ESTIMATE: run_estimate,
    Command.RESAMPLE: run_resample,
    Command.METRICS: run_metrics,
    Command.FIG1: run_fig1,
    Command.AUGMENT: run_augment,
    Command.OPE: run_ope,
    Command.BIAS_VARIANCE: run_bias_variance,
}


def run(config: ExperimentConfig) -> RunManifest:
    """Run an experiment, write its artifacts atomically and the manifest last.

    Args:
        config (ExperimentConfig): The validated experiment.

    Returns:
        RunManifest: The manifest written to ``config.output_dir``.
    """
    params = config.command_params()
    logger.info("Running %s with seed %d", config.command.value, config.seed)
    start = time.perf_counter()
    with recording_streams() as consumed:
        artifacts = RUNNERS[config.command](config, params)
    for name, content in artifacts.items():
        atomic_write_bytes(config.output_dir / name, content)
    end = time.perf_counter()
    manifest = RunManifest(
        config=config.to_dict(),
        version=package_version(),
        streams=list(consumed),
        duration=format_timespan(start, end),
        duration_seconds=end - start,
        outputs=digest_outputs(config.output_dir, list(artifacts)),
    )
    manifest.write(config.output_dir)
    logger.info(
        "Wrote %d artifact(s) to %s in %s", len(artifacts), config.output_dir, manifest.duration
    )
    return manifest
