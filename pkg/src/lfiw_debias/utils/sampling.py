import logging
from collections.abc import Callable
from typing import Any

import numpy as np

from .exceptions import DimensionMismatchError
from .exceptions import SamplerError

logger = logging.getLogger(__name__)

Sampler = Callable[[int, np.random.Generator], Any]
"""A sampling handle: ``sampler(n, rng)`` returns ``n`` points as an ``(n, d)`` array."""


def as_points(values: Any, name: str = "points") -> np.ndarray:
    """Coerce a collection of sample points into an ``(n, d)`` float matrix.

    A one-dimensional input is read as ``n`` points of dimension one.

    Args:
        values (Any): Nested sequence or array of feature values.
        name (str): Name used in error messages.

    Returns:
        np.ndarray: A C-contiguous float64 matrix.

    Raises:
        ValueError: If the input has more than two dimensions, zero columns or non-finite entries.

    Examples:
        >>> as_points([1.0, 2.0, 3.0]).shape
        (3, 1)
    """
    points = np.asarray(values, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2:
        raise ValueError(f"'{name}' must be one- or two-dimensional, got shape {points.shape}")
    if points.shape[1] == 0:
        raise ValueError(f"'{name}' must have at least one feature column")
    if not np.all(np.isfinite(points)):
        raise ValueError(f"'{name}' contains NaN or infinite values")
    return np.ascontiguousarray(points)


def draw_samples(
    sampler: Sampler, n: int, rng: np.random.Generator, input_dim: int | None = None
) -> np.ndarray:
    """Call a user sampler and validate what it returns.

    Args:
        sampler (Sampler): Sampling handle.
        n (int): Number of points requested.
        rng (np.random.Generator): Stream handed to the sampler.
        input_dim (int | None): Expected feature dimension, if known.

    Returns:
        np.ndarray: The points as an ``(n, d)`` matrix.

    Raises:
        SamplerError: If the sampler raises or returns the wrong number of finite points.
        DimensionMismatchError: If the points have the wrong dimension.
    """
    try:
        raw = sampler(n, rng)
    except Exception as e:
        raise SamplerError(f"Sampler failed while drawing {n} points: {e}") from e
    try:
        points = as_points(raw, "sampler output")
    except ValueError as e:
        raise SamplerError(str(e)) from e
    if len(points) != n:
        raise SamplerError(f"Sampler returned {len(points)} points, expected {n}")
    if input_dim is not None and points.shape[1] != input_dim:
        raise DimensionMismatchError(
            f"Sampler returned points of dimension {points.shape[1]}, expected {input_dim}"
        )
    return points
