import importlib
from importlib.util import find_spec

import pytest


def test_package_import() -> None:
    spec = find_spec("lfiw_debias")
    assert spec is not None, "lfiw_debias module not found"

    try:
        importlib.import_module("lfiw_debias")
    except ImportError as e:
        pytest.fail(f"Failed to import lfiw_debias: {e}")


def test_top_level_access() -> None:
    import lfiw_debias

    for name in ("WeightConfig", "estimate_expectation", "train_ensemble", "run"):
        assert hasattr(lfiw_debias, name), f"{name} is not accessible at the top level"
    assert callable(lfiw_debias.estimate_expectation)


@pytest.mark.parametrize(
    "module_path, symbol",
    [
        ("lfiw_debias.ratio", "ProbClassifier"),
        ("lfiw_debias.estimators", "bootstrap_ci"),
        ("lfiw_debias.resample", "ResampledModel"),
        ("lfiw_debias.metrics", "debiased_metric_suite"),
        ("lfiw_debias.synthetic", "run_fig1_experiment"),
        ("lfiw_debias.mbope", "horizon_sweep"),
        ("lfiw_debias.setup", "ExperimentConfig"),
        ("lfiw_debias.utils", "derive_rng"),
    ],
)
def test_subpackages_reexport(module_path: str, symbol: str) -> None:
    module = importlib.import_module(module_path)
    assert hasattr(module, symbol), f"{symbol} is not exported by {module_path}"
