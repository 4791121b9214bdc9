"""Tests for run manifests."""
import hashlib
import json

import pytest

from proteus.errors import ManifestError
from proteus.manifest import (
    RunManifest,
    config_digest,
    count_rows,
    created_timestamp,
    read_manifest,
    sha256_file,
    update_manifest,
    verify_manifest,
)
from proteus.transition_map import StreamConfig


@pytest.fixture
def pinned_clock(monkeypatch):
    """Fix the manifest creation time."""
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")


@pytest.fixture
def outputs(tmp_path):
    """Two small output files."""
    csv = tmp_path / "stream_000.csv"
    csv.write_text("index,return\n0,0.5\n1,-0.25\n")
    meta = tmp_path / "embedding.json"
    meta.write_text('{"window": 50}\n')
    return tmp_path, [csv, meta]


def test_created_timestamp_honours_source_date_epoch(pinned_clock):
    """Test the pinned timestamp format."""
    assert created_timestamp() == "2023-11-14T22:13:20Z"


def test_created_timestamp_ignores_bad_epoch(monkeypatch):
    """Test that an invalid epoch falls back to the clock."""
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "soon")
    assert created_timestamp().endswith("Z")


def test_file_helpers(outputs):
    """Test hashing and row counting."""
    directory, (csv, meta) = outputs
    assert sha256_file(csv) == hashlib.sha256(csv.read_bytes()).hexdigest()
    assert count_rows(csv) == 2
    assert count_rows(meta) is None


def test_config_digest_is_stable():
    """Test that equal configurations share a digest."""
    assert config_digest(StreamConfig(seed=3)) == config_digest(StreamConfig(seed=3))
    assert config_digest(StreamConfig(seed=3)) != config_digest(StreamConfig(seed=4))
    assert config_digest({"b": 1, "a": 2}) == config_digest({"a": 2, "b": 1})


def test_update_and_verify(outputs, pinned_clock):
    """Test that a fresh manifest verifies."""
    directory, files = outputs
    manifest = update_manifest(
        directory, files, seed=42, configs={"stream": StreamConfig(seed=42)}, split_index=500
    )
    assert [entry.path for entry in manifest.files] == ["embedding.json", "stream_000.csv"]
    assert manifest.files[1].rows == 2
    assert manifest.created_utc == "2023-11-14T22:13:20Z"
    verified = verify_manifest(directory)
    assert verified == manifest
    assert read_manifest(directory / "manifest.json").split_index == 500


def test_manifest_is_byte_identical_across_runs(outputs, pinned_clock):
    """Test that rerunning with the same outputs rewrites the same bytes."""
    directory, files = outputs
    update_manifest(directory, files, seed=1)
    first = (directory / "manifest.json").read_bytes()
    update_manifest(directory, files, seed=1)
    assert (directory / "manifest.json").read_bytes() == first


def test_update_merges_entries(outputs, pinned_clock):
    """Test that later stages add to an existing manifest."""
    directory, (csv, meta) = outputs
    update_manifest(directory, [csv], seed=7, configs={"map": {"n": 1}})
    manifest = update_manifest(directory, [meta], configs={"analysis": {"k": 4}})
    assert len(manifest.files) == 2
    assert manifest.seed == 7
    assert set(manifest.configs) == {"map", "analysis"}


def test_verify_detects_tampering(outputs, pinned_clock):
    """Test that a changed file fails verification."""
    directory, (csv, meta) = outputs
    update_manifest(directory, [csv, meta])
    csv.write_text("index,return\n0,0.5\n1,-0.26\n")
    with pytest.raises(ManifestError, match="hash mismatch") as exc_info:
        verify_manifest(directory)
    assert exc_info.value.path.name == "stream_000.csv"


def test_verify_detects_missing_file(outputs, pinned_clock):
    """Test that a deleted file fails verification."""
    directory, (csv, meta) = outputs
    update_manifest(directory, [csv, meta])
    meta.unlink()
    with pytest.raises(ManifestError, match="missing"):
        verify_manifest(directory / "manifest.json")


def test_verify_detects_row_count_change(outputs, pinned_clock):
    """Test that an edited row count fails verification."""
    directory, (csv, _) = outputs
    update_manifest(directory, [csv])
    manifest_path = directory / "manifest.json"
    payload = json.loads(manifest_path.read_text())
    payload["files"][0]["rows"] = 3
    manifest_path.write_text(json.dumps(payload))
    with pytest.raises(ManifestError, match="row count"):
        verify_manifest(directory)


def test_read_manifest_errors(tmp_path):
    """Test missing and malformed manifests."""
    with pytest.raises(ManifestError):
        read_manifest(tmp_path / "manifest.json")
    (tmp_path / "manifest.json").write_text('{"files": []}')
    with pytest.raises(ManifestError, match="malformed"):
        read_manifest(tmp_path / "manifest.json")


def test_manifest_dict_roundtrip():
    """Test conversion to and from JSON-ready dictionaries."""
    manifest = RunManifest.from_dict(
        {
            "seed": 3,
            "created_utc": "2024-01-01T00:00:00Z",
            "configs": {"b": "x", "a": "y"},
            "files": [{"path": "a.csv", "sha256": "00", "rows": 1}],
            "split_index": None,
        }
    )
    assert list(manifest.to_dict()["configs"]) == ["a", "b"]
    assert RunManifest.from_dict(manifest.to_dict()) == manifest
