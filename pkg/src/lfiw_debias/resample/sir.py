"""Sampling-importance-resampling from a model reweighted by importance weights.

The resampled model has density proportional to ``p_theta(x) * w(x)``. It is sampled
by drawing ``T`` particles from the base model and picking one of them with probability
proportional to its weight.
"""

import itertools
import logging
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from ..estimators.weights import evaluate_statistic
from ..utils.exceptions import EmptyDataError
from ..utils.exceptions import NumericalError
from ..utils.sampling import Sampler
from ..utils.sampling import as_points
from ..utils.sampling import draw_samples
from ..utils.seeding import derive_rng
from .distributions import DiscreteDistributionPair
from .distributions import empirical_frequencies

logger = logging.getLogger(__name__)

WeightFn = Callable[[np.ndarray], Any]

MAX_EXACT_SUPPORT = 6
MAX_EXACT_PARTICLES = 3
DEFAULT_CHUNK_SIZE = 4096


def evaluate_weights(weight_fn: WeightFn, points: np.ndarray) -> np.ndarray:
    """Evaluate a weight function on a batch and check the result.

    Args:
        weight_fn (WeightFn): Maps ``(n, d)`` points to ``n`` weights.
        points (np.ndarray): The points.

    Returns:
        np.ndarray: Finite non-negative weights of shape ``(n,)``.

    Raises:
        NumericalError: If a weight is negative or not finite.
        ValueError: If the number of weights does not match the number of points.
    """
    weights = np.asarray(weight_fn(points), dtype=float).ravel()
    if weights.shape != (len(points),):
        raise ValueError(f"weight_fn returned {weights.size} weights for {len(points)} points")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise NumericalError("Importance weights must be finite and non-negative")
    return weights


@dataclass(frozen=True, eq=False)
class ResampledModel:
    """A base sampler reweighted by ``weight_fn`` and resampled from ``particles`` draws.

    Attributes:
        base_sampler (Sampler): ``base_sampler(n, rng)`` draws ``n`` points from ``p_theta``.
        weight_fn (WeightFn): Importance weights of a batch of points.
        particles (int): Number of particles ``T`` per resampling step.
    """

    base_sampler: Sampler
    weight_fn: WeightFn
    particles: int = 100

    def __post_init__(self) -> None:
        """Check the particle count."""
        if self.particles < 1:
            raise ValueError(f"particles must be at least 1, got {self.particles}")

    def draw_particles(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw one set of ``T`` particles with their raw weights."""
        points = draw_samples(self.base_sampler, self.particles, rng)
        return points, evaluate_weights(self.weight_fn, points)


@dataclass(frozen=True)
class PartitionEstimate:
    """Monte Carlo estimate of the normalizing constant ``Z = E_{p_theta}[w]``."""

    z_hat: float
    stderr: float
    n_samples: int


def estimate_partition(model: ResampledModel, n_samples: int, seed: int) -> PartitionEstimate:
    """Estimate ``Z`` as the mean raw weight of fresh base draws.

    Args:
        model (ResampledModel): The resampled model; only its sampler and weights are used.
        n_samples (int): Number of base draws.
        seed (int): Root seed.

    Returns:
        PartitionEstimate: ``z_hat`` with standard error ``std / sqrt(n)`` (0 for one draw).
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be at least 1, got {n_samples}")
    rng = derive_rng(seed, "sir")
    points = draw_samples(model.base_sampler, n_samples, rng)
    weights = evaluate_weights(model.weight_fn, points)
    stderr = float(weights.std(ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else 0.0
    return PartitionEstimate(z_hat=float(weights.mean()), stderr=stderr, n_samples=n_samples)


def exact_partition(pair: DiscreteDistributionPair, weights: Any) -> float:
    """``Z = sum_x p_theta(x) w(x)`` by enumeration.

    Examples:
        >>> pair = DiscreteDistributionPair([0.75, 0.25], [0.25, 0.75])
        >>> exact_partition(pair, pair.oracle_weights())
        1.0
    """
    table = np.asarray(weights, dtype=float)
    if table.shape != (pair.k,):
        raise ValueError(f"Expected {pair.k} weights, got shape {table.shape}")
    return float(np.dot(pair.p_theta, table))


def _pick(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one column index per row with probability proportional to the row weights."""
    totals = weights.sum(axis=1)
    if np.any(totals <= 0):
        raise NumericalError(
            f"{int(np.sum(totals <= 0))} particle set(s) have all-zero weights; "
            "cannot resample from them"
        )
    cumulative = np.cumsum(weights, axis=1)
    targets = rng.random(len(weights)) * totals
    index = np.argmax(cumulative > targets[:, None], axis=1)
    return np.asarray(index)


def sir_sample_many(
    model: ResampledModel, n_draws: int, seed: int, chunk_size: int = DEFAULT_CHUNK_SIZE
) -> np.ndarray:
    """Draw ``n_draws`` independent samples from the SIR approximation.

    Each draw uses its own set of ``T`` particles. Draws are produced in chunks so that
    at most ``chunk_size * T`` particles are held in memory at once.

    Args:
        model (ResampledModel): The resampled model.
        n_draws (int): Number of output samples.
        seed (int): Root seed.
        chunk_size (int): Draws per vectorized chunk.

    Returns:
        np.ndarray: Samples of shape ``(n_draws, d)``.

    Raises:
        NumericalError: If some particle set has only zero weights (unless ``T = 1``).
    """
    if n_draws < 1 or chunk_size < 1:
        raise ValueError(f"n_draws and chunk_size must be positive, got {n_draws}, {chunk_size}")
    rng = derive_rng(seed, "sir")
    t = model.particles
    chunks = []
    for start in range(0, n_draws, chunk_size):
        m = min(chunk_size, n_draws - start)
        particles = draw_samples(model.base_sampler, m * t, rng)
        if t == 1:
            chunks.append(particles)
            continue
        weights = evaluate_weights(model.weight_fn, particles).reshape(m, t)
        index = _pick(weights, rng)
        chunks.append(particles.reshape(m, t, -1)[np.arange(m), index])
    samples = np.vstack(chunks)
    logger.debug("Drew %d SIR samples with %d particles each", n_draws, t)
    return samples


def sir_sample(model: ResampledModel, seed: int) -> np.ndarray:
    """Draw a single point from the SIR approximation.

    With ``T = 1`` the single base particle is returned whatever its weight.

    Args:
        model (ResampledModel): The resampled model.
        seed (int): Root seed.

    Returns:
        np.ndarray: One point of shape ``(d,)``.
    """
    return sir_sample_many(model, 1, seed)[0]


def sir_expectation(model: ResampledModel, f: Callable[[np.ndarray], Any], seed: int) -> float:
    """Expectation of ``f`` under the SIR approximation for one particle set.

    This is the self-normalized importance weighted mean over the ``T`` particles.

    Args:
        model (ResampledModel): The resampled model.
        f (Callable[[np.ndarray], Any]): Point or vectorized statistic, as accepted by
            :func:`~lfiw_debias.estimators.weights.evaluate_statistic`.
        seed (int): Root seed; the particles are drawn from the ``"sir"`` stream.

    Returns:
        float: ``sum_i w_i f(x_i) / sum_i w_i``.
    """
    points, weights = model.draw_particles(derive_rng(seed, "sir"))
    total = weights.sum()
    if not total > 0:
        raise NumericalError("All particle weights are zero")
    values = evaluate_statistic(f, points)
    return float(np.sum((weights / total) * values))


@dataclass(frozen=True)
class DensityEstimate:
    """Monte Carlo estimate of a density value with its standard error."""

    value: float
    stderr: float
    n_outer: int


def sir_density(
    model: ResampledModel,
    x: Any,
    base_density: Callable[[np.ndarray], Any],
    n_outer: int,
    seed: int,
) -> DensityEstimate:
    """Estimate the density of the SIR approximation at ``x``.

    The density is ``T * p_theta(x) * E[w(x) / (w(x) + sum_{i>=2} w(x_i))]`` with the
    expectation over ``T - 1`` auxiliary base particles. The factor ``T`` makes it
    integrate to one, so ``T = 1`` gives the base density and ``T -> inf`` the
    resampled model's density.

    Args:
        model (ResampledModel): The resampled model.
        x (Any): One point of shape ``(d,)``.
        base_density (Callable[[np.ndarray], Any]): Density of ``p_theta`` on ``(n, d)`` points.
        n_outer (int): Monte Carlo replications of the auxiliary particles.
        seed (int): Root seed.

    Returns:
        DensityEstimate: Mean and standard error over the replications.
    """
    if n_outer < 1:
        raise ValueError(f"n_outer must be at least 1, got {n_outer}")
    point = as_points(np.asarray(x, dtype=float).reshape(1, -1), "x")
    base_value = float(np.asarray(base_density(point), dtype=float).ravel()[0])
    t = model.particles
    if t == 1:
        return DensityEstimate(value=base_value, stderr=0.0, n_outer=n_outer)
    w_x = float(evaluate_weights(model.weight_fn, point)[0])
    rng = derive_rng(seed, "sir")
    auxiliary = draw_samples(model.base_sampler, n_outer * (t - 1), rng, point.shape[1])
    others = evaluate_weights(model.weight_fn, auxiliary).reshape(n_outer, t - 1).sum(axis=1)
    denominator = w_x + others
    fractions = np.divide(w_x, denominator, out=np.zeros(n_outer), where=denominator > 0)
    values = t * base_value * fractions
    stderr = float(values.std(ddof=1) / np.sqrt(n_outer)) if n_outer > 1 else 0.0
    return DensityEstimate(value=float(values.mean()), stderr=stderr, n_outer=n_outer)


def exact_sir_density(
    pair: DiscreteDistributionPair, weights: Any, particles: int
) -> np.ndarray:
    """SIR density on every symbol of a small discrete model, by enumeration.

    Enumerates all ``K ** (T - 1)`` auxiliary particle configurations.

    Args:
        pair (DiscreteDistributionPair): Supplies ``p_theta``.
        weights (Any): One weight per symbol.
        particles (int): ``T``, at most 3.

    Returns:
        np.ndarray: The SIR density of each symbol; it sums to 1.

    Raises:
        ValueError: If ``K > 6`` or ``T > 3``.
        NumericalError: If a reachable particle set has all-zero weights.

    Examples:
        >>> pair = DiscreteDistributionPair([0.9, 0.1], [0.5, 0.5])
        >>> np.round(exact_sir_density(pair, [1.8, 0.2], 2), 12).tolist()
        [0.7, 0.3]
    """
    if pair.k > MAX_EXACT_SUPPORT or not 1 <= particles <= MAX_EXACT_PARTICLES:
        raise ValueError(
            f"Exact SIR densities need K <= {MAX_EXACT_SUPPORT} and 1 <= T <= "
            f"{MAX_EXACT_PARTICLES}, got K={pair.k}, T={particles}"
        )
    table = np.asarray(weights, dtype=float)
    if table.shape != (pair.k,) or np.any(table < 0):
        raise ValueError(f"Expected {pair.k} non-negative weights")
    density = np.zeros(pair.k)
    for x in range(pair.k):
        if pair.p_theta[x] == 0:
            continue
        expectation = 0.0
        for others in itertools.product(range(pair.k), repeat=particles - 1):
            probability = float(np.prod(pair.p_theta[list(others)]))
            if probability == 0:
                continue
            denominator = table[x] + table[list(others)].sum()
            if denominator == 0:
                raise NumericalError("A reachable particle set has all-zero weights")
            expectation += probability * table[x] / denominator
        density[x] = particles * pair.p_theta[x] * expectation
    return density


def sir_histogram(samples: Any, pair: DiscreteDistributionPair, weights: Any) -> pd.DataFrame:
    """Empirical SIR frequencies next to the exact resampled distribution.

    Args:
        samples (Any): SIR draws of symbols.
        pair (DiscreteDistributionPair): The base model.
        weights (Any): One weight per symbol.

    Returns:
        pd.DataFrame: Columns ``symbol, count, frequency, induced``.
    """
    points = as_points(samples, "samples")
    if len(points) == 0:
        raise EmptyDataError("No samples to summarize")
    frequencies = empirical_frequencies(points, pair.k)
    return pd.DataFrame(
        {
            "symbol": pair.support,
            "count": np.rint(frequencies * len(points)).astype(int),
            "frequency": frequencies,
            "induced": pair.induced_distribution(weights),
        }
    )
