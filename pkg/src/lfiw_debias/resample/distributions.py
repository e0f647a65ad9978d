import logging
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import xlogy

from ..utils.exceptions import SupportError
from ..utils.sampling import as_points

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-12


def _probability_vector(values: Sequence[float] | np.ndarray, name: str) -> np.ndarray:
    vector = np.array(values, dtype=float).ravel()
    if vector.size == 0:
        raise ValueError(f"'{name}' must have at least one entry")
    if not np.all(np.isfinite(vector)) or np.any(vector < 0):
        raise ValueError(f"'{name}' must be finite and non-negative")
    if abs(vector.sum() - 1.0) > NORMALIZATION_TOLERANCE:
        raise ValueError(f"'{name}' must sum to 1, got {vector.sum()!r}")
    vector.setflags(write=False)
    return vector


def _symbols(x: Any) -> np.ndarray:
    """Integer symbol indices from a scalar, a vector or an ``(n, 1)`` point matrix."""
    values = np.asarray(x)
    if values.ndim == 2:
        if values.shape[1] != 1:
            raise ValueError(f"Discrete points must have one column, got shape {values.shape}")
        values = values[:, 0]
    symbols = np.rint(values).astype(int)
    if not np.array_equal(symbols, values):
        raise ValueError("Discrete points must be integer symbol indices")
    return symbols


@dataclass(frozen=True, eq=False)
class DiscreteDistributionPair:
    """A true distribution ``p`` and a model ``p_theta`` on the symbols ``0..K-1``.

    Used as an exact oracle: importance weights, partition functions, KL divergences
    and SIR densities can all be computed by enumerating the support.

    Attributes:
        p (np.ndarray): Probabilities of the true distribution.
        p_theta (np.ndarray): Probabilities of the model distribution.
        absolutely_continuous (bool): Require ``p_theta > 0`` wherever ``p > 0``.
    """

    p: np.ndarray
    p_theta: np.ndarray
    absolutely_continuous: bool = True

    def __post_init__(self) -> None:
        """Validate both probability vectors."""
        p = _probability_vector(self.p, "p")
        p_theta = _probability_vector(self.p_theta, "p_theta")
        if p.size != p_theta.size:
            raise ValueError(
                f"p and p_theta must have the same support size, got {p.size} and {p_theta.size}"
            )
        if self.absolutely_continuous and np.any((p > 0) & (p_theta == 0)):
            raise SupportError("p puts mass on symbols where p_theta has none")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "p_theta", p_theta)

    @property
    def k(self) -> int:
        """Support size."""
        return int(self.p.size)

    @property
    def support(self) -> np.ndarray:
        """The symbol indices ``0..K-1``."""
        return np.arange(self.k)

    def _lookup(self, vector: np.ndarray, x: Any) -> Any:
        symbols = _symbols(x)
        if np.any((symbols < 0) | (symbols >= self.k)):
            raise ValueError(f"Symbols must lie in 0..{self.k - 1}")
        values = vector[symbols]
        return float(values) if np.ndim(values) == 0 else values

    def target_density(self, x: Any) -> Any:
        """``p`` at one symbol or a batch of symbols."""
        return self._lookup(self.p, x)

    def model_density(self, x: Any) -> Any:
        """``p_theta`` at one symbol or a batch of symbols."""
        return self._lookup(self.p_theta, x)

    def oracle_weights(self) -> np.ndarray:
        """The exact likelihood ratio ``p / p_theta`` per symbol.

        Symbols outside the model support get weight 0 when ``p`` is also 0 there.

        Raises:
            SupportError: If ``p > 0`` on a symbol where ``p_theta = 0``.
        """
        if np.any((self.p > 0) & (self.p_theta == 0)):
            raise SupportError("The likelihood ratio is unbounded where p_theta = 0")
        return np.divide(
            self.p, self.p_theta, out=np.zeros(self.k), where=self.p_theta > 0
        )

    def weight_fn(self, weights: Sequence[float] | np.ndarray | None = None) -> "SymbolWeights":
        """Wrap per-symbol weights as a callable on ``(n, 1)`` point matrices.

        Args:
            weights (Sequence[float] | np.ndarray | None): One weight per symbol; the oracle
                weights when omitted.

        Returns:
            SymbolWeights: The weight function.
        """
        table = self.oracle_weights() if weights is None else np.asarray(weights, dtype=float)
        if table.shape != (self.k,):
            raise ValueError(f"Expected {self.k} weights, got shape {table.shape}")
        return SymbolWeights(table)

    def sample_target(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` symbols from ``p`` as an ``(n, 1)`` matrix."""
        return rng.choice(self.k, size=n, p=self.p).astype(float).reshape(-1, 1)

    def sample_model(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` symbols from ``p_theta`` as an ``(n, 1)`` matrix."""
        return rng.choice(self.k, size=n, p=self.p_theta).astype(float).reshape(-1, 1)

    def induced_distribution(self, weights: Sequence[float] | np.ndarray) -> np.ndarray:
        """The resampled distribution ``p_theta * w / Z`` for per-symbol weights ``w``.

        Raises:
            ValueError: If the weights are negative or ``Z`` is zero.
        """
        table = np.asarray(weights, dtype=float)
        if table.shape != (self.k,) or np.any(table < 0):
            raise ValueError(f"Expected {self.k} non-negative weights")
        unnormalized = self.p_theta * table
        z = unnormalized.sum()
        if not z > 0:
            raise ValueError("The weights vanish on the support of p_theta")
        return unnormalized / z

    def kl(self) -> float:
        """``D_KL(p || p_theta)``."""
        return kl_divergence(self.p, self.p_theta)

    def reverse_kl(self) -> float:
        """``D_KL(p_theta || p)``."""
        return kl_divergence(self.p_theta, self.p)

    def total_variation(self) -> float:
        """Total variation distance between ``p`` and ``p_theta``."""
        return total_variation(self.p, self.p_theta)

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible representation."""
        return {"p": self.p.tolist(), "p_theta": self.p_theta.tolist()}

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "DiscreteDistributionPair":
        """Inverse of :meth:`to_dict`."""
        return cls(p=np.asarray(document["p"]), p_theta=np.asarray(document["p_theta"]))


@dataclass(frozen=True, eq=False)
class SymbolWeights:
    """Per-symbol weights usable as a ``weight_fn`` on discrete points.

    Attributes:
        table (np.ndarray): One non-negative weight per symbol.
    """

    table: np.ndarray

    def __call__(self, points: Any) -> np.ndarray:
        """Weights of an ``(n, 1)`` matrix (or vector) of symbols."""
        return self.table[_symbols(as_points(points))]


def kl_divergence(a: np.ndarray, b: np.ndarray) -> float:
    """``D_KL(a || b)`` for probability vectors, ``inf`` when ``a`` is not dominated by ``b``.

    Examples:
        >>> kl_divergence(np.array([0.5, 0.5]), np.array([0.5, 0.5]))
        0.0
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any((a > 0) & (b == 0)):
        return float("inf")
    ratio = np.divide(a, b, out=np.ones_like(a), where=b > 0)
    return float(np.sum(xlogy(a, ratio)))


def total_variation(a: np.ndarray, b: np.ndarray) -> float:
    """Half the L1 distance between two probability vectors."""
    return float(0.5 * np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)).sum())


def empirical_frequencies(samples: Any, k: int) -> np.ndarray:
    """Relative frequency of each symbol ``0..k-1`` in a sample.

    Args:
        samples (Any): Symbols as a vector or an ``(n, 1)`` matrix.
        k (int): Support size.

    Returns:
        np.ndarray: Frequencies summing to 1.
    """
    symbols = _symbols(samples).ravel()
    if symbols.size == 0:
        raise ValueError("Cannot compute frequencies of an empty sample")
    return np.bincount(symbols, minlength=k)[:k] / symbols.size


def random_triple(
    rng: np.random.Generator, k: int, log_weight_range: float = 2.0
) -> tuple[DiscreteDistributionPair, np.ndarray]:
    """Draw a random pair of densities with random positive weights.

    Both densities are Dirichlet(1, ..., 1) draws and the weights are log-uniform on
    ``[exp(-log_weight_range), exp(log_weight_range)]``.

    Args:
        rng (np.random.Generator): Random stream.
        k (int): Support size, at least 2.
        log_weight_range (float): Half-width of the log-weight interval.

    Returns:
        tuple[DiscreteDistributionPair, np.ndarray]: The pair and one weight per symbol.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    p = rng.dirichlet(np.ones(k))
    p_theta = rng.dirichlet(np.ones(k))
    weights = np.exp(rng.uniform(-log_weight_range, log_weight_range, size=k))
    pair = DiscreteDistributionPair(p / p.sum(), p_theta / p_theta.sum())
    return pair, weights
