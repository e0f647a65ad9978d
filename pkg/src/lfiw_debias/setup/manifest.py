"""Run manifests recording what produced a set of artifacts, and their verification."""

import json
import logging
from dataclasses import dataclass
from dataclasses import field
from importlib.metadata import PackageNotFoundError
from importlib.metadata import version
from pathlib import Path
from typing import Any

from ..utils.exceptions import ConfigError
from ..utils.functions import atomic_write_bytes
from ..utils.functions import sha256_file
from ..utils.functions import to_json_bytes

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TIMING_NAME = "timing.json"
DISTRIBUTION_NAME = "lfiw-debias"


def package_version() -> str:
    """Installed version of the package, or ``"unknown"`` when running from a source tree."""
    try:
        return version(DISTRIBUTION_NAME)
    except PackageNotFoundError:
        return "unknown"


@dataclass(frozen=True)
class RunManifest:
    """Provenance of one run.

    ``manifest.json`` holds everything but the timing, so rerunning a config into the
    same directory rewrites it byte for byte. The timing goes to ``timing.json``.

    Attributes:
        config (dict[str, Any]): Snapshot of the experiment config.
        version (str): Package version.
        streams (list[str]): Names of the seed streams the run opened, sorted.
        duration (str): Wall-clock duration, formatted.
        duration_seconds (float): Wall-clock duration in seconds.
        outputs (dict[str, str]): SHA-256 digest per artifact, by file name.
    """

    config: dict[str, Any]
    version: str
    streams: list[str] = field(default_factory=list)
    duration: str = ""
    duration_seconds: float = 0.0
    outputs: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """JSON-compatible representation."""
        return {
            "config": self.config,
            "version": self.version,
            "streams": sorted(self.streams),
            "outputs": dict(sorted(self.outputs.items())),
        }

    @classmethod
    def from_dict(cls, document: dict[str, Any]) -> "RunManifest":
        """Inverse of :meth:`to_dict`; the timing keys are optional."""
        try:
            return cls(
                config=dict(document["config"]),
                version=str(document["version"]),
                streams=list(document.get("streams", [])),
                duration=str(document.get("duration", "")),
                duration_seconds=float(document.get("duration_seconds", 0.0)),
                outputs={str(k): str(v) for k, v in document["outputs"].items()},
            )
        except (KeyError, AttributeError, TypeError) as e:
            raise ConfigError(f"Malformed manifest: {e}") from e

    def timing_dict(self) -> dict[str, Any]:
        """Wall-clock timing, kept out of the manifest document."""
        return {"duration": self.duration, "duration_seconds": self.duration_seconds}

    def write(self, directory: str | Path) -> Path:
        """Write ``timing.json`` and then ``manifest.json`` into ``directory``.

        Returns:
            Path: The manifest file.
        """
        directory = Path(directory)
        atomic_write_bytes(directory / TIMING_NAME, to_json_bytes(self.timing_dict()))
        return atomic_write_bytes(directory / MANIFEST_NAME, to_json_bytes(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        """Read a manifest file and the ``timing.json`` beside it, if present."""
        path = Path(path)
        document = _read_json(path)
        timing = path.parent / TIMING_NAME
        if timing.is_file():
            document = {**document, **_read_json(timing)}
        return cls.from_dict(document)


def _read_json(path: Path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as infile:
        try:
            document = json.load(infile)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return document


def digest_outputs(directory: str | Path, names: list[str]) -> dict[str, str]:
    """SHA-256 digest of each named file in ``directory``."""
    return {name: sha256_file(Path(directory) / name) for name in sorted(names)}


def verify_manifest(path: str | Path) -> list[str]:
    """Recompute the artifact digests listed in a manifest.

    Artifacts are looked up next to the manifest.

    Args:
        path (str | Path): The manifest file.

    Returns:
        list[str]: Names of artifacts whose digest no longer matches; empty when all match.

    Raises:
        FileNotFoundError: If the manifest or a listed artifact is missing.
    """
    manifest_path = Path(path)
    manifest = RunManifest.load(manifest_path)
    mismatched = []
    for name, expected in sorted(manifest.outputs.items()):
        artifact = manifest_path.parent / name
        if not artifact.is_file():
            raise FileNotFoundError(f"Artifact listed in the manifest is missing: {artifact}")
        if sha256_file(artifact) != expected:
            logger.warning("Digest mismatch for %s", artifact)
            mismatched.append(name)
    logger.info("Verified %d artifact(s), %d mismatched", len(manifest.outputs), len(mismatched))
    return mismatched
