import hashlib
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


def format_timespan(start: int | float, end: int | float) -> str:
    """Formats the elapsed time between two time points into a human-readable string.

    Args:
        start (int | float): Start time in seconds, typically as a timestamp or relative value.
        end (int | float): End time in seconds, typically as a timestamp or relative value.

    Returns:
        str: A formatted string representing the elapsed time between `start` and `end`.
        The format is "MM:SS.sss (sss ms)", where:
        - MM is minutes, zero-padded to 2 digits.
        - SS.sss is seconds with 2 decimal places.
        - sss ms represents milliseconds.

    Raises:
        ValueError: If `start` is greater than `end`.
    """
    if start > end:
        raise ValueError("Start time must not be greater than end time.")

    elapsed_time = end - start
    minutes, seconds = divmod(elapsed_time, 60)
    milliseconds = (seconds - int(seconds)) * 1000
    return f"{int(minutes):0>2}:{seconds:05.2f} ({milliseconds:.0f} ms)"


def format_float(value: Any) -> str:
    """Shortest round-trip decimal representation of a number.

    Args:
        value (Any): A float, integer or numpy scalar.

    Returns:
        str: ``repr`` of the Python float, ``nan``/``inf``/``-inf`` for non-finite values,
        and plain digits for integers.

    Examples:
        >>> format_float(0.1)
        '0.1'
        >>> format_float(np.float64(2.0))
        '2.0'
    """
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, int | np.integer):
        return str(int(value))
    number = float(value)
    if math.isnan(number):
        return "nan"
    if math.isinf(number):
        return "inf" if number > 0 else "-inf"
    return repr(number)


def frame_to_csv_bytes(frame: pd.DataFrame) -> bytes:
    """Render a DataFrame as byte-stable CSV.

    Every numeric cell goes through :func:`format_float`, so identical numbers always
    produce identical bytes regardless of the pandas version's float formatter.

    Args:
        frame (pd.DataFrame): The table to render. The index is not written.

    Returns:
        bytes: UTF-8 encoded CSV with ``\\n`` line endings.
    """
    rendered = frame.copy()
    for column in rendered.columns:
        if pd.api.types.is_numeric_dtype(rendered[column]) or pd.api.types.is_bool_dtype(
            rendered[column]
        ):
            rendered[column] = [format_float(v) for v in rendered[column]]
    return rendered.to_csv(index=False, lineterminator="\n").encode("utf-8")


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, bool | np.bool_):
        return bool(value)
    if isinstance(value, int | np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        number = float(value)
        # JSON has no literal for non-finite numbers
        return number if math.isfinite(number) else format_float(number)
    return value


def to_json_bytes(payload: dict[str, Any]) -> bytes:
    """Serialize a report dictionary deterministically.

    Args:
        payload (dict[str, Any]): Report content; numpy scalars and arrays are converted.

    Returns:
        bytes: Indented JSON with sorted keys and a trailing newline.
    """
    return (json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n").encode("utf-8")


def atomic_write_bytes(path: str | Path, content: bytes) -> Path:
    """Write a file atomically by writing a sibling temporary file and renaming it.

    Args:
        path (str | Path): Destination path. Parent directories are created.
        content (bytes): File content.

    Returns:
        Path: The destination path.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    handle, temp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "wb") as temp_file:
            temp_file.write(content)
            temp_file.flush()
            os.fsync(temp_file.fileno())
        os.replace(temp_name, target)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    logger.debug("Wrote %d bytes to %s", len(content), target)
    return target


def sha256_file(path: str | Path) -> str:
    """Hex SHA-256 digest of a file's content.

    Args:
        path (str | Path): File to hash.

    Returns:
        str: Lower-case hexadecimal digest.
    """
    digest = hashlib.sha256()
    with open(path, "rb") as infile:
        for block in iter(lambda: infile.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()
