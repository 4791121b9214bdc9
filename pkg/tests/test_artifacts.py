"""Tests for artifact readers and writers."""
import json

import numpy as np
import pandas as pd
import pytest

from proteus.artifacts import (
    FitSummary,
    load_models,
    parse_features,
    parse_ground_truth,
    parse_stream,
    read_model,
    write_clusters,
    write_embedding,
    write_features,
    write_ground_truth,
    write_histogram,
    write_model,
    write_stats,
    write_stream,
)
from proteus.analysis import describe, embed_states, histogram, kmeans
from proteus.econometrics import ArmaParams, GarchParams, RegimeModel
from proteus.errors import ArtifactError
from proteus.features import FEATURE_FILE_COLUMNS, featurize
from proteus.model_fitting import FitReport
from proteus.stream_simulation import simulate_stream
from proteus.transition_map import StreamConfig, generate_map


@pytest.fixture
def stream(four_models):
    """A simulated 12,000-instance stream."""
    config = StreamConfig(length=12_000, seed=5)
    return simulate_stream(four_models, generate_map(config, 4), config)


def test_model_file(tmp_path, garch_model):
    """Test that a model and its fit statistics are stored exactly."""
    report = FitReport(garch_model, log_likelihood=1234.5, k=5, aic=-2459.0)
    path = write_model(garch_model, tmp_path / "state_1.json", report)
    loaded = read_model(path)
    assert loaded.model == garch_model
    assert loaded.fit == FitSummary(1234.5, 5, -2459.0)
    payload = json.loads(path.read_text())
    assert payload["phi"] == [0.2]
    assert path.read_text().endswith("}\n")


def test_model_file_keeps_full_precision(tmp_path):
    """Test that awkward floats survive JSON."""
    model = RegimeModel(
        7, ArmaParams(1 / 3, (0.1 + 0.2,)), GarchParams(2e-7 / 3, (0.1,), (0.7000000000000001,))
    )
    assert read_model(write_model(model, tmp_path / "m.json")).model == model


def test_read_model_rejects_bad_files(tmp_path):
    """Test missing fields, invalid parameters and missing files."""
    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text('{"state_id": 1}')
    with pytest.raises(ArtifactError, match="invalid model"):
        read_model(incomplete)
    explosive = tmp_path / "explosive.json"
    explosive.write_text(
        json.dumps(
            {"state_id": 1, "mu": 0, "phi": [1.5], "theta": [], "omega": 1, "alpha": [], "beta": []}
        )
    )
    with pytest.raises(ArtifactError, match="invalid model"):
        read_model(explosive)
    with pytest.raises(ArtifactError, match="file not found"):
        read_model(tmp_path / "absent.json")


def test_load_models(model_dir, four_models):
    """Test loading a directory of models keyed by state."""
    models = load_models(model_dir)
    assert sorted(models) == [1, 2, 3, 4]
    assert models[3] == four_models[2]


def test_load_models_rejects_duplicates(model_dir, four_models):
    """Test that two files may not share a state id."""
    write_model(four_models[0], model_dir / "copy.json")
    with pytest.raises(ArtifactError, match="duplicate state id 1"):
        load_models(model_dir)


def test_load_models_needs_models(tmp_path):
    """Test that an empty directory is rejected."""
    with pytest.raises(ArtifactError):
        load_models(tmp_path)


def test_stream_file_roundtrip(tmp_path, stream):
    """Test that returns and annotations are read back exactly."""
    path = write_stream(stream, tmp_path / "stream_000.csv")
    loaded = parse_stream(path, seed=stream.seed)
    assert loaded.equals(stream)
    assert loaded.log.transition_map == stream.log.transition_map


def test_stream_file_layout(tmp_path, stream):
    """Test header and empty state_to outside transitions."""
    path = write_stream(stream, tmp_path / "stream.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "index,return,state_from,state_to,blend_weight"
    assert len(lines) == 12_001
    index, _, state_from, state_to, weight = lines[1].split(",")
    assert (index, state_from, state_to, weight) == ("0", "1", "", "0")
    assert b"\r" not in path.read_bytes()


def test_ground_truth_file(tmp_path, stream):
    """Test events with their drift type."""
    path = write_ground_truth(stream.log.transition_map, tmp_path / "ground_truth.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["start_index", "end_index", "from_state", "to_state", "type"]
    assert set(frame["type"]) == {"abrupt", "gradual"}
    assert (frame["end_index"] - frame["start_index"]).isin([100, 1_000]).all()
    parsed = parse_ground_truth(path, 12_000, stream.log.transition_map.initial_state)
    assert parsed == stream.log.transition_map


def test_feature_file_roundtrip(tmp_path, stream):
    """Test that feature values survive a write and read."""
    frame = featurize(stream.returns)
    path = write_features(frame, tmp_path / "features_000.csv")
    loaded = parse_features(path)
    assert tuple(loaded.columns) == FEATURE_FILE_COLUMNS
    pd.testing.assert_frame_equal(loaded, frame, check_dtype=False, check_exact=True)


def test_parse_features_rejects_other_columns(tmp_path):
    """Test that a table with the wrong header is rejected."""
    path = tmp_path / "features.csv"
    path.write_text("index,rsi10,label\n0,50.0,1\n")
    with pytest.raises(ArtifactError, match="expected columns"):
        parse_features(path)


def test_analysis_outputs(tmp_path, stream):
    """Test the stats, histogram, embedding and cluster files."""
    frame = featurize(stream.returns)
    stats = write_stats(describe(frame), tmp_path / "stats.csv")
    assert stats.read_text().splitlines()[0] == "feature,mean,std,min,25%,50%,75%,max"
    assert len(stats.read_text().splitlines()) == 19

    hist = write_histogram(histogram(stream.returns, 10, (-0.05, 0.05)), tmp_path / "h.csv")
    assert pd.read_csv(hist).columns.tolist() == ["bin_left", "bin_right", "count"]

    embedding = embed_states(stream.returns, stream.log, window=50)
    points, meta = write_embedding(embedding, tmp_path / "embedding.csv", tmp_path / "embedding.json")
    assert len(pd.read_csv(points)) == 12_000 - 49
    assert json.loads(meta.read_text())["window"] == 50

    result = kmeans(embedding.points, k=4, seed=0, n_init=2)
    centroids, assignments = write_clusters(
        result, tmp_path / "centroids.csv", tmp_path / "assignments.csv"
    )
    assert len(pd.read_csv(centroids)) == 4
    assert np.array_equal(pd.read_csv(assignments)["cluster"].to_numpy(), result.assignments)
