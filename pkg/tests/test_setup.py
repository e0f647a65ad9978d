import json

import numpy as np
import pytest

from lfiw_debias.setup.config import Command
from lfiw_debias.setup.config import EstimateParams
from lfiw_debias.setup.config import ExperimentConfig
from lfiw_debias.setup.config import TrainRatioParams
from lfiw_debias.setup.config import default_output_dir
from lfiw_debias.setup.config import merge_overrides
from lfiw_debias.setup.config import read_config_document
from lfiw_debias.setup.manifest import MANIFEST_NAME
from lfiw_debias.setup.manifest import TIMING_NAME
from lfiw_debias.setup.manifest import RunManifest
from lfiw_debias.setup.manifest import verify_manifest
from lfiw_debias.setup.runners import run
from lfiw_debias.utils.exceptions import ConfigError


@pytest.fixture()
def resample_config(tmp_path) -> ExperimentConfig:
    return ExperimentConfig(
        command=Command.RESAMPLE,
        seed=3,
        output_dir=tmp_path / "out",
        params={"particles": 5, "draws": 200, "k": 3, "diagnostic_samples": 500},
    )


def test_config_rejects_unknown_keys(tmp_path) -> None:
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"command": "fig1", "sede": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"seed": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"command": "fig2"})
    with pytest.raises(ConfigError):
        ExperimentConfig(command=Command.FIG1, params={"n_per_clas": 100})
    with pytest.raises(ConfigError):
        ExperimentConfig(command=Command.FIG1, inputs={"pair": "pair.json"})


def test_config_keeps_seed_and_threads_at_the_top_level(tmp_path) -> None:
    with pytest.raises(ConfigError):
        ExperimentConfig(command=Command.FIG1, params={"seed": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig(command=Command.FIG1, seed=-1)
    with pytest.raises(ConfigError):
        ExperimentConfig(command=Command.FIG1, threads=0)
    config = ExperimentConfig(command=Command.FIG1, seed=7, threads=2, output_dir=tmp_path)
    params = config.command_params()
    assert (params.seed, params.threads) == (7, 2)
    assert config.to_dict()["params"]["seed"] == 7


def test_config_parses_nested_training_options(tmp_path) -> None:
    config = ExperimentConfig.from_dict(
        {
            "command": "estimate",
            "output_dir": str(tmp_path),
            "params": {"train": {"architecture": "logistic", "epochs": 3}, "alpha": 0.5},
        }
    )
    params = config.command_params()
    assert isinstance(params, EstimateParams)
    assert params.train.epochs == 3
    assert params.weight_config().alpha == 0.5
    with pytest.raises(ConfigError):
        ExperimentConfig(command=Command.ESTIMATE, params={"statistic": "median"})


def test_default_output_dir_reads_the_environment(monkeypatch, tmp_path) -> None:
    monkeypatch.setenv("LFIW_DEBIAS_OUTPUT_DIR", str(tmp_path))
    assert default_output_dir() == tmp_path
    assert ExperimentConfig(command=Command.FIG1).output_dir == tmp_path


def test_merge_overrides() -> None:
    document = {"command": "ope", "seed": 1, "params": {"n_traj": 10}, "inputs": {"env": "a.json"}}
    merged = merge_overrides(
        document, {"seed": 5, "threads": None, "params": {"horizon": 3, "n_traj": None}, "inputs": {}}
    )
    assert merged == {
        "command": "ope",
        "seed": 5,
        "params": {"n_traj": 10, "horizon": 3},
        "inputs": {"env": "a.json"},
    }
    assert document["params"] == {"n_traj": 10}


def test_read_config_document(tmp_path) -> None:
    path = tmp_path / "config.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        read_config_document(path)
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        read_config_document(path)
    with pytest.raises(OSError):
        read_config_document(tmp_path / "missing.json")


def test_run_writes_artifacts_and_manifest(resample_config) -> None:
    manifest = run(resample_config)
    out = resample_config.output_dir
    assert set(manifest.outputs) == {"histogram.csv", "diagnostics.json"}
    assert (out / MANIFEST_NAME).is_file()
    assert {"data", "negatives", "sir"} <= set(manifest.streams)
    assert verify_manifest(out / MANIFEST_NAME) == []
    diagnostics = json.loads((out / "diagnostics.json").read_text())
    assert diagnostics["draws"] == 200
    assert diagnostics["estimated"] is not None

    loaded = RunManifest.load(out / MANIFEST_NAME)
    assert loaded.outputs == manifest.outputs
    assert loaded.config["command"] == "resample"


def test_run_is_reproducible(resample_config, tmp_path) -> None:
    first = run(resample_config)
    again = ExperimentConfig.from_dict({**resample_config.to_dict(), "output_dir": str(tmp_path / "again")})
    assert run(again).outputs == first.outputs


def test_rerun_rewrites_the_manifest_byte_for_byte(resample_config) -> None:
    out = resample_config.output_dir
    run(resample_config)
    first = (out / MANIFEST_NAME).read_bytes()
    manifest = run(resample_config)
    assert (out / MANIFEST_NAME).read_bytes() == first
    document = json.loads(first)
    assert "duration" not in document
    assert "duration_seconds" not in document
    timing = json.loads((out / TIMING_NAME).read_text())
    assert timing["duration_seconds"] == manifest.duration_seconds
    assert TIMING_NAME not in manifest.outputs
    assert RunManifest.load(out / MANIFEST_NAME).duration == manifest.duration


def test_verify_reports_changed_and_missing_artifacts(resample_config) -> None:
    run(resample_config)
    out = resample_config.output_dir
    histogram = out / "histogram.csv"
    histogram.write_text(histogram.read_text()[:-5])
    assert verify_manifest(out / MANIFEST_NAME) == ["histogram.csv"]
    (out / "diagnostics.json").unlink()
    with pytest.raises(FileNotFoundError):
        verify_manifest(out / MANIFEST_NAME)


def test_estimate_from_a_weights_file(tmp_path) -> None:
    samples = tmp_path / "samples.csv"
    samples.write_text("x0\n1\n2\n3\n")
    weights = tmp_path / "weights.csv"
    weights.write_text("weight\n1\n1\n4\n")
    config = ExperimentConfig(
        command=Command.ESTIMATE,
        output_dir=tmp_path / "out",
        inputs={"samples": str(samples), "weights": str(weights)},
        params={"self_normalize": True},
    )
    run(config)
    report = json.loads((tmp_path / "out" / "estimate.json").read_text())
    assert report["weighted"]["value"] == pytest.approx(2.5)
    assert report["unweighted"]["value"] == pytest.approx(2.0)
    assert report["estimator"] == "alpha=1.0,beta=0.0,sn"


def test_estimate_needs_a_weight_source(tmp_path) -> None:
    samples = tmp_path / "samples.csv"
    samples.write_text("x0\n1\n2\n")
    config = ExperimentConfig(
        command=Command.ESTIMATE, output_dir=tmp_path / "out", inputs={"samples": str(samples)}
    )
    with pytest.raises(ConfigError):
        run(config)


def test_train_ratio_run(tmp_path) -> None:
    rng = np.random.default_rng(0)
    positives = tmp_path / "positives.csv"
    negatives = tmp_path / "negatives.csv"
    positives.write_text("x0\n" + "\n".join(str(v) for v in rng.normal(1.0, 1.0, 40)) + "\n")
    negatives.write_text("x0\n" + "\n".join(str(v) for v in rng.normal(-1.0, 1.0, 40)) + "\n")
    config = ExperimentConfig(
        command=Command.TRAIN_RATIO,
        output_dir=tmp_path / "out",
        inputs={"positives": str(positives), "negatives": str(negatives)},
        params={"train": {"architecture": "logistic", "epochs": 5}, "n_classifiers": 2, "n_bins": 2},
    )
    manifest = run(config)
    assert set(manifest.outputs) == {"classifier.json", "calibration.csv", "report.json"}
    assert {"split", "ensemble"} <= set(manifest.streams)
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["gamma"] == 1.0
    assert len(report["training_loss"]) == 2
    assert report["n_holdout"] == 16
    calibration = (tmp_path / "out" / "calibration.csv").read_text().splitlines()
    assert len(calibration) == 3


def test_train_ratio_needs_two_calibration_bins() -> None:
    assert TrainRatioParams.from_dict({"n_bins": 2}).n_bins == 2
    with pytest.raises(ConfigError):
        TrainRatioParams.from_dict({"n_bins": 1})
    with pytest.raises(ConfigError):
        TrainRatioParams(n_classifiers=0)
