"""
Run manifests: seeds, configuration digests and hashes of every output file.
"""
import dataclasses
import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

from .artifacts import MANIFEST_FILE, read_json, write_json
from .errors import ArtifactError, ManifestError

logger = logging.getLogger(__name__)

HASH_CHUNK_BYTES = 1 << 20


@dataclass(frozen=True)
class FileEntry:
    """One output file: path relative to the manifest, digest and row count."""
    path: str
    sha256: str
    rows: Optional[int] = None


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce and check a run's outputs."""
    seed: Optional[int]
    created_utc: str
    configs: Dict[str, str] = field(default_factory=dict)
    files: Tuple[FileEntry, ...] = ()
    split_index: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        """JSON-ready representation."""
        return {
            "seed": self.seed,
            "created_utc": self.created_utc,
            "configs": dict(sorted(self.configs.items())),
            "files": [dataclasses.asdict(entry) for entry in self.files],
            "split_index": self.split_index,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "RunManifest":
        """Rebuild a manifest from its JSON representation."""
        return cls(
            seed=payload.get("seed"),
            created_utc=str(payload["created_utc"]),
            configs={str(k): str(v) for k, v in payload.get("configs", {}).items()},
            files=tuple(
                FileEntry(str(f["path"]), str(f["sha256"]), f.get("rows"))
                for f in payload.get("files", [])
            ),
            split_index=payload.get("split_index"),
        )


def created_timestamp() -> str:
    """UTC creation time, pinned by SOURCE_DATE_EPOCH when it is set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        try:
            moment = datetime.fromtimestamp(int(epoch), tz=timezone.utc)
        except ValueError:
            logger.warning("Ignoring invalid SOURCE_DATE_EPOCH '%s'", epoch)
            moment = datetime.now(timezone.utc)
    else:
        moment = datetime.now(timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def sha256_file(path: Path | str) -> str:
    """Hex SHA-256 digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(HASH_CHUNK_BYTES), b""):
            digest.update(chunk)
    return digest.hexdigest()


def count_rows(path: Path | str) -> Optional[int]:
    """Data rows of a CSV file (lines after the header); None for other files."""
    path = Path(path)
    if path.suffix.lower() != ".csv":
        return None
    with open(path, "rb") as handle:
        lines = sum(1 for _ in handle)
    return max(lines - 1, 0)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def config_digest(config: Any) -> str:
    """
    SHA-256 of a configuration's canonical JSON form.

    Args:
        config: Dataclass instance or mapping

    Returns:
        Hex digest, stable across runs
    """
    payload = dataclasses.asdict(config) if dataclasses.is_dataclass(config) else dict(config)
    canonical = json.dumps(payload, sort_keys=True, default=_jsonable, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def describe_file(directory: Path, path: Path | str) -> FileEntry:
    """Hash and count one output file relative to the manifest directory."""
    path = Path(path)
    try:
        relative = path.resolve().relative_to(directory.resolve())
    except ValueError as e:
        raise ArtifactError(path, f"not inside {directory}") from e
    return FileEntry(relative.as_posix(), sha256_file(path), count_rows(path))


def update_manifest(
    directory: Path | str,
    files: Iterable[Path | str],
    seed: Optional[int] = None,
    configs: Optional[Mapping[str, Any]] = None,
    split_index: Optional[int] = None,
) -> RunManifest:
    """
    Record output files in the directory's manifest, merging with any
    manifest already there.

    Args:
        directory: Output directory holding manifest.json
        files: Files written by this run
        seed: Seed of this run
        configs: Configurations by name, recorded as digests
        split_index: Train/test boundary of this run

    Returns:
        The manifest as written
    """
    directory = Path(directory)
    manifest_path = directory / MANIFEST_FILE
    previous: Optional[RunManifest] = None
    if manifest_path.exists():
        try:
            previous = RunManifest.from_dict(read_json(manifest_path))
        except (ArtifactError, KeyError, TypeError) as e:
            logger.warning("Replacing unreadable manifest %s: %s", manifest_path, e)

    entries: Dict[str, FileEntry] = {}
    digests: Dict[str, str] = {}
    if previous is not None:
        entries.update((entry.path, entry) for entry in previous.files)
        digests.update(previous.configs)
        if seed is None:
            seed = previous.seed
        if split_index is None:
            split_index = previous.split_index
    for path in files:
        entry = describe_file(directory, path)
        entries[entry.path] = entry
    for name, config in (configs or {}).items():
        digests[name] = config_digest(config)

    manifest = RunManifest(
        seed=seed,
        created_utc=created_timestamp(),
        configs=digests,
        files=tuple(entries[key] for key in sorted(entries)),
        split_index=split_index,
    )
    write_json(manifest.to_dict(), manifest_path)
    logger.info("Recorded %d file(s) in %s", len(manifest.files), manifest_path)
    return manifest


def read_manifest(path: Path | str) -> RunManifest:
    """
    Read a manifest file.

    Raises:
        ManifestError: If the manifest is missing or malformed
    """
    path = Path(path)
    try:
        return RunManifest.from_dict(read_json(path))
    except ArtifactError as e:
        raise ManifestError(path, e.reason) from e
    except (KeyError, TypeError, AttributeError) as e:
        raise ManifestError(path, f"malformed manifest: {e}") from e


def verify_manifest(path: Path | str) -> RunManifest:
    """
    Check every listed file's hash and row count.

    Args:
        path: manifest.json, or the directory holding it

    Returns:
        The verified manifest

    Raises:
        ManifestError: Naming the first missing or mismatching file
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    manifest = read_manifest(path)
    for entry in manifest.files:
        target = path.parent / entry.path
        if not target.is_file():
            raise ManifestError(target, "listed in the manifest but missing")
        if sha256_file(target) != entry.sha256:
            raise ManifestError(target, "hash mismatch")
        if entry.rows is not None and count_rows(target) != entry.rows:
            raise ManifestError(target, "row count mismatch")
    logger.info("Verified %d file(s) against %s", len(manifest.files), path)
    return manifest
