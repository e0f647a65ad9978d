"""Command-line interface."""

import functools
import json
import logging
from collections.abc import Callable
from typing import Any
from typing import NoReturn

import click

from .setup.config import Command
from .setup.config import ExperimentConfig
from .setup.config import merge_overrides
from .setup.config import read_config_document
from .setup.manifest import verify_manifest
from .setup.runners import run
from .utils.exceptions import LfiwError

logger = logging.getLogger(__name__)

EXIT_INTEGRITY = 1
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _fail(kind: str, error: BaseException, code: int) -> NoReturn:
    click.echo(f"error kind={kind} message={json.dumps(str(error))}", err=True)
    raise SystemExit(code)


def _handle_errors(command: Callable[..., Any]) -> Callable[..., Any]:
    """Map exceptions onto one stderr line and the documented exit status."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except (ValueError, KeyError, TypeError) as e:
            logger.debug("Validation failure", exc_info=True)
            _fail("validation", e, EXIT_VALIDATION)
        except OSError as e:
            logger.debug("I/O failure", exc_info=True)
            _fail("io", e, EXIT_IO)
        except (LfiwError, ArithmeticError) as e:
            logger.debug("Numeric failure", exc_info=True)
            _fail("numeric", e, EXIT_NUMERIC)

    return wrapper


def _execute(
    command: Command,
    seed: int | None,
    output_dir: str | None,
    threads: int | None,
    config_path: str | None,
    inputs: dict[str, Any] | None = None,
    params: dict[str, Any] | None = None,
) -> None:
    document = read_config_document(config_path) if config_path else {}
    if document.get("command", command.value) != command.value:
        raise click.UsageError(
            f"{config_path} configures '{document['command']}', not '{command.value}'"
        )
    merged = merge_overrides(
        {**document, "command": command.value},
        {
            "seed": seed,
            "output_dir": output_dir,
            "threads": threads,
            "inputs": inputs or {},
            "params": params or {},
        },
    )
    config = ExperimentConfig.from_dict(merged)
    manifest = run(config)
    for name in manifest.outputs:
        click.echo(config.output_dir / name)


def common_options(command: Callable[..., Any]) -> Callable[..., Any]:
    """Options shared by every experiment subcommand."""
    options = [
        click.option("--seed", type=click.IntRange(min=0), default=None, help="Root seed (default 0)."),
        click.option(
            "--output-dir",
            type=click.Path(file_okay=False),
            default=None,
            help="Artifact directory (default $LFIW_DEBIAS_OUTPUT_DIR or ./lfiw-output).",
        ),
        click.option(
            "--threads", type=click.IntRange(min=1), default=None, help="Cap on worker threads."
        ),
        click.option(
            "--config",
            "config_path",
            type=click.Path(dir_okay=False),
            default=None,
            help="JSON experiment config; flags override its values.",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _path_option(name: str, help_text: str) -> Callable[..., Any]:
    return click.option(name, type=click.Path(dir_okay=False), default=None, help=help_text)


def _self_normalize_option(command: Callable[..., Any]) -> Callable[..., Any]:
    return click.option(
        "--self-normalize/--no-self-normalize",
        default=None,
        help="Divide by the sum of the weights.",
    )(command)


def _int_list(
    ctx: click.Context, param: click.Parameter, value: str | None
) -> list[int] | None:
    if value is None:
        return None
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma separated integers, got {value!r}") from e


@click.group()
@click.option("-v", "--verbose", count=True, help="-v for progress, -vv for debug output.")
@click.version_option(package_name="lfiw-debias")
def main(verbose: int) -> None:
    """Importance weighted experiments on samples from generative models."""
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT)


@main.command("run")
@click.option(
    "--config",
    "config_path",
    type=click.Path(dir_okay=False),
    required=True,
    help="JSON experiment config naming the command.",
)
@_handle_errors
def run_command(config_path: str) -> None:
    """Run the experiment described by a config file."""
    config = ExperimentConfig.load(config_path)
    manifest = run(config)
    for name in manifest.outputs:
        click.echo(config.output_dir / name)


@main.command("verify")
@click.argument("manifest", type=click.Path(dir_okay=False))
@_handle_errors
def verify_command(manifest: str) -> None:
    """Recompute the artifact digests listed in MANIFEST."""
    mismatched = verify_manifest(manifest)
    if mismatched:
        _fail(
            "integrity",
            ValueError(f"Digest mismatch for {', '.join(mismatched)}"),
            EXIT_INTEGRITY,
        )
    click.echo("ok")


@main.command("train-ratio")
@_path_option("--positives", "Samples from the data distribution (CSV or JSONL).")
@_path_option("--negatives", "Samples from the model (CSV or JSONL).")
@click.option("--n-classifiers", type=int, default=None, help="Ensemble size.")
@click.option("--holdout-fraction", type=float, default=None, help="Share held out for calibration.")
@click.option("--gamma", type=float, default=None, help="Odds ratio; class size ratio by default.")
@common_options
@_handle_errors
def train_ratio_command(
    positives: str | None,
    negatives: str | None,
    n_classifiers: int | None,
    holdout_fraction: float | None,
    gamma: float | None,
    **common: Any,
) -> None:
    """Train a probabilistic classifier between data and model samples."""
    _execute(
        Command.TRAIN_RATIO,
        **common,
        inputs={"positives": positives, "negatives": negatives},
        params={
            "n_classifiers": n_classifiers,
            "holdout_fraction": holdout_fraction,
            "gamma": gamma,
        },
    )


@main.command("estimate")
@_path_option("--positives", "Samples from the data distribution.")
@_path_option("--negatives", "Samples from the model used for training.")
@_path_option("--samples", "Model samples to weight; the negatives by default.")
@_path_option("--classifier", "Trained classifier JSON.")
@_path_option("--weights", "Precomputed raw weights CSV.")
@click.option("--alpha", type=float, default=None, help="Flattening power.")
@click.option("--beta", type=float, default=None, help="Clipping floor.")
@_self_normalize_option
@click.option("--gamma", type=float, default=None, help="Odds ratio override.")
@click.option(
    "--statistic",
    type=click.Choice(["mean", "second_moment"]),
    default=None,
    help="Statistic of the chosen column.",
)
@click.option("--column", type=int, default=None, help="Feature column of the statistic.")
@click.option("--n-classifiers", type=int, default=None, help="Ensemble size.")
@click.option("--bootstrap-n", type=int, default=None, help="Bootstrap resamples; 0 skips.")
@click.option("--confidence", type=float, default=None, help="Bootstrap interval coverage.")
@common_options
@_handle_errors
def estimate_command(
    positives: str | None,
    negatives: str | None,
    samples: str | None,
    classifier: str | None,
    weights: str | None,
    alpha: float | None,
    beta: float | None,
    self_normalize: bool | None,
    gamma: float | None,
    statistic: str | None,
    column: int | None,
    n_classifiers: int | None,
    bootstrap_n: int | None,
    confidence: float | None,
    **common: Any,
) -> None:
    """Importance weighted estimate of a statistic of model samples."""
    _execute(
        Command.ESTIMATE,
        **common,
        inputs={
            "positives": positives,
            "negatives": negatives,
            "samples": samples,
            "classifier": classifier,
            "weights": weights,
        },
        params={
            "alpha": alpha,
            "beta": beta,
            "self_normalize": self_normalize,
            "gamma": gamma,
            "statistic": statistic,
            "column": column,
            "n_classifiers": n_classifiers,
            "bootstrap_n": bootstrap_n,
            "confidence": confidence,
        },
    )


@main.command("resample")
@_path_option("--pair", "JSON with p, p_theta and optional weights; a random triple otherwise.")
@click.option("--particles", type=int, default=None, help="Particles per draw, T.")
@click.option("--draws", type=int, default=None, help="Number of SIR draws.")
@click.option("--k", type=int, default=None, help="Support size of the random triple.")
@common_options
@_handle_errors
def resample_command(
    pair: str | None,
    particles: int | None,
    draws: int | None,
    k: int | None,
    **common: Any,
) -> None:
    """Sampling-importance-resampling with KL diagnostics on a discrete pair."""
    _execute(
        Command.RESAMPLE,
        **common,
        inputs={"pair": pair},
        params={"particles": particles, "draws": draws, "k": k},
    )


@main.command("metrics")
@_path_option("--model-features", "Features of model samples (CSV).")
@_path_option("--real-features", "Features of real samples (CSV).")
@_path_option("--weights", "Raw weights of the model samples (CSV).")
@_path_option("--classifier", "Classifier JSON applied to the model points.")
@_path_option("--model-points", "Classifier inputs; the model features by default.")
@_path_option("--model-logits", "Class scores of the model samples (CSV).")
@click.option("--bandwidth", type=float, default=None, help="Kernel distance bandwidth.")
@click.option("--alpha", type=float, default=None, help="Flattening power.")
@click.option("--beta", type=float, default=None, help="Clipping floor.")
@_self_normalize_option
@common_options
@_handle_errors
def metrics_command(
    model_features: str | None,
    real_features: str | None,
    weights: str | None,
    classifier: str | None,
    model_points: str | None,
    model_logits: str | None,
    bandwidth: float | None,
    alpha: float | None,
    beta: float | None,
    self_normalize: bool | None,
    **common: Any,
) -> None:
    """Raw and importance weighted sample quality metrics."""
    _execute(
        Command.METRICS,
        **common,
        inputs={
            "model_features": model_features,
            "real_features": real_features,
            "weights": weights,
            "classifier": classifier,
            "model_points": model_points,
            "model_logits": model_logits,
        },
        params={
            "bandwidth": bandwidth,
            "alpha": alpha,
            "beta": beta,
            "self_normalize": self_normalize,
        },
    )


@main.command("fig1")
@click.option("--n", "n_per_class", type=int, default=None, help="Samples per class.")
@click.option("--n-bootstrap", type=int, default=None, help="Bootstrap resamples for the bands.")
@click.option("--epochs", type=int, default=None, help="Classifier training epochs.")
@common_options
@_handle_errors
def fig1_command(
    n_per_class: int | None, n_bootstrap: int | None, epochs: int | None, **common: Any
) -> None:
    """Trained against optimal classifier probabilities on the bimodal toy."""
    _execute(
        Command.FIG1,
        **common,
        params={"n_per_class": n_per_class, "n_bootstrap": n_bootstrap, "epochs": epochs},
    )


@main.command("augment")
@click.option("--m", "mixture_m", type=float, default=None, help="Weight of the real risk.")
@click.option(
    "--weights",
    type=click.Choice(["unit", "lfiw", "oracle"]),
    default=None,
    help="Weighting of generated points.",
)
@click.option("--flip-fraction", type=float, default=None, help="Contamination rate.")
@common_options
@_handle_errors
def augment_command(
    mixture_m: float | None, weights: str | None, flip_fraction: float | None, **common: Any
) -> None:
    """Downstream classification with weighted generated data."""
    _execute(
        Command.AUGMENT,
        **common,
        params={"mixture_m": mixture_m, "weights": weights, "flip_fraction": flip_fraction},
    )


@main.command("ope")
@_path_option("--env", "MDP JSON; the four-state chain when omitted.")
@_path_option("--behavior", "Behaviour policy JSON.")
@click.option(
    "--eval", "eval_policy", type=click.Path(dir_okay=False), default=None, help="Evaluation policy JSON."
)
@click.option("--n-traj", type=int, default=None, help="Model rollouts per estimate.")
@click.option("--n-data-traj", type=int, default=None, help="Behaviour trajectories collected.")
@click.option("--horizon", type=int, default=None, help="Episode length.")
@click.option(
    "--H-sweep",
    "weight_horizons",
    callback=_int_list,
    default=None,
    help="Comma separated weighting horizons, e.g. 0,20,40.",
)
@click.option("--n-classifiers", type=int, default=None, help="Transition classifiers averaged.")
@click.option(
    "--weight-source",
    type=click.Choice(["classifier", "oracle"]),
    default=None,
    help="Learned or exact transition weights.",
)
@_self_normalize_option
@common_options
@_handle_errors
def ope_command(
    env: str | None,
    behavior: str | None,
    eval_policy: str | None,
    n_traj: int | None,
    n_data_traj: int | None,
    horizon: int | None,
    weight_horizons: list[int] | None,
    n_classifiers: int | None,
    weight_source: str | None,
    self_normalize: bool | None,
    **common: Any,
) -> None:
    """Off-policy evaluation with a learned model and transition weights."""
    _execute(
        Command.OPE,
        **common,
        inputs={"env": env, "behavior": behavior, "eval": eval_policy},
        params={
            "n_traj": n_traj,
            "n_data_traj": n_data_traj,
            "horizon": horizon,
            "weight_horizons": weight_horizons,
            "n_classifiers": n_classifiers,
            "weights": weight_source,
            "self_normalize": self_normalize,
        },
    )


@main.command("bias-variance")
@click.option("--n-trials", type=int, default=None, help="Independent trials.")
@click.option("--batch-size", type=int, default=None, help="Model samples per trial.")
@click.option("--n-per-class", type=int, default=None, help="Samples per class for the classifier.")
@common_options
@_handle_errors
def bias_variance_command(
    n_trials: int | None, batch_size: int | None, n_per_class: int | None, **common: Any
) -> None:
    """Bias-variance comparison of the estimator family on the bimodal toy."""
    _execute(
        Command.BIAS_VARIANCE,
        **common,
        params={"n_trials": n_trials, "batch_size": batch_size, "n_per_class": n_per_class},
    )


if __name__ == "__main__":
    main(prog_name="lfiw-debias")  # pragma: no cover
