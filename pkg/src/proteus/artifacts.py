"""
Readers and writers for every on-disk artifact.

CSV files use a header row, "\\n" line endings and 17 significant digits for
floats, so parsing a written file returns the exact values that were written.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, NamedTuple, Optional

import numpy as np
import pandas as pd

from .analysis import ClusterResult, Histogram, StateEmbedding
from .econometrics import ArmaParams, GarchParams, Innovation, RegimeModel
from .errors import ArtifactError, ModelValidationError, TransitionMapError
from .features import FEATURE_FILE_COLUMNS
from .model_fitting import FitReport
from .stream_simulation import GroundTruthLog, SimulatedStream
from .transition_map import (
    DEFAULT_GRADUAL_DURATION,
    TransitionEvent,
    TransitionMap,
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
LINE_TERMINATOR = "\n"
MAP_COLUMNS = ("start_index", "duration", "from_state", "to_state")
GROUND_TRUTH_COLUMNS = ("start_index", "end_index", "from_state", "to_state", "type")
STREAM_COLUMNS = ("index", "return", "state_from", "state_to", "blend_weight")
MANIFEST_FILE = "manifest.json"


class FitSummary(NamedTuple):
    """Fit statistics stored next to a model."""
    log_likelihood: float
    k: int
    aic: float


@dataclass(frozen=True)
class ModelFile:
    """A model read from disk with its optional fit statistics."""
    model: RegimeModel
    fit: Optional[FitSummary] = None


def _prepare(path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_frame(frame: pd.DataFrame, path: Path | str, **kwargs: Any) -> Path:
    path = _prepare(path)
    try:
        frame.to_csv(
            path,
            index=kwargs.pop("index", False),
            float_format=FLOAT_FORMAT,
            lineterminator=LINE_TERMINATOR,
            **kwargs,
        )
    except OSError as e:
        raise ArtifactError(path, f"cannot write: {e}") from e
    logger.debug("Wrote %d rows to %s", len(frame), path)
    return path


def _read_frame(path: Path | str, columns: tuple[str, ...], **kwargs: Any) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(path, "file not found")
    try:
        frame = pd.read_csv(path, float_precision="round_trip", **kwargs)
    except (ValueError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise ArtifactError(path, f"cannot parse: {e}") from e
    if tuple(frame.columns) != columns:
        raise ArtifactError(
            path, f"expected columns {list(columns)}, found {list(frame.columns)}"
        )
    return frame


def write_json(payload: Mapping[str, Any], path: Path | str) -> Path:
    """Write JSON with two-space indentation and a trailing newline."""
    path = _prepare(path)
    try:
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactError(path, f"cannot write: {e}") from e
    return path


def read_json(path: Path | str) -> Dict[str, Any]:
    """Read a JSON object."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise ArtifactError(path, "file not found") from e
    except (OSError, ValueError) as e:
        raise ArtifactError(path, f"cannot parse: {e}") from e
    if not isinstance(payload, dict):
        raise ArtifactError(path, "expected a JSON object")
    return payload


# Models

def model_to_dict(model: RegimeModel, fit: Optional[FitReport] = None) -> Dict[str, Any]:
    """JSON-ready representation of a model and its fit statistics."""
    payload: Dict[str, Any] = {
        "state_id": model.state_id,
        "mu": model.arma.mu,
        "phi": list(model.arma.phi),
        "theta": list(model.arma.theta),
        "omega": model.garch.omega,
        "alpha": list(model.garch.alpha),
        "beta": list(model.garch.beta),
        "innovation": model.innovation.value,
    }
    if fit is not None:
        payload["fit"] = {
            "log_likelihood": fit.log_likelihood,
            "k": fit.k,
            "aic": fit.aic,
        }
    return payload


def model_from_dict(payload: Mapping[str, Any]) -> ModelFile:
    """
    Rebuild a model from its JSON representation.

    Raises:
        KeyError, TypeError, ValueError: If a field is missing or mistyped
        ModelValidationError: If the parameters are invalid
    """
    model = RegimeModel(
        state_id=int(payload["state_id"]),
        arma=ArmaParams(payload["mu"], payload["phi"], payload["theta"]),
        garch=GarchParams(payload["omega"], payload["alpha"], payload["beta"]),
        innovation=Innovation(payload.get("innovation", Innovation.NORMAL.value)),
    )
    fit = payload.get("fit")
    summary = None
    if fit is not None:
        summary = FitSummary(float(fit["log_likelihood"]), int(fit["k"]), float(fit["aic"]))
    return ModelFile(model, summary)


def write_model(
    model: RegimeModel, path: Path | str, fit: Optional[FitReport] = None
) -> Path:
    """Write one model as JSON."""
    return write_json(model_to_dict(model, fit), path)


def read_model(path: Path | str) -> ModelFile:
    """
    Read one model file.

    Raises:
        ArtifactError: If the file is unreadable, incomplete or invalid
    """
    payload = read_json(path)
    try:
        return model_from_dict(payload)
    except (KeyError, TypeError, ValueError, ModelValidationError) as e:
        raise ArtifactError(path, f"invalid model: {e}") from e


def load_models(directory: Path | str) -> Dict[int, RegimeModel]:
    """
    Read every model JSON in a directory, keyed by state id.

    Raises:
        ArtifactError: If there are no models or two share a state id
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ArtifactError(directory, "not a directory")
    models: Dict[int, RegimeModel] = {}
    for path in sorted(directory.glob("*.json")):
        if path.name == MANIFEST_FILE:
            continue
        model = read_model(path).model
        if model.state_id in models:
            raise ArtifactError(path, f"duplicate state id {model.state_id}")
        models[model.state_id] = model
    if not models:
        raise ArtifactError(directory, "no model files found")
    logger.info("Loaded %d model(s) from %s", len(models), directory)
    return models


# Transition maps

def map_metadata_path(path: Path | str) -> Path:
    """JSON file holding the stream length and initial state of a map file."""
    return Path(path).with_suffix(".json")


def write_map(transition_map: TransitionMap, path: Path | str) -> Path:
    """
    Write a map as start_index,duration,from_state,to_state rows.

    The stream length and initial state go to a JSON file beside the CSV
    (see map_metadata_path) so an empty map or one whose stream runs past the
    last event reads back unchanged.
    """
    frame = pd.DataFrame(
        [
            (e.start_index, e.duration, e.from_state, e.to_state)
            for e in transition_map
        ],
        columns=list(MAP_COLUMNS),
        dtype=np.int64,
    )
    path = _write_frame(frame, path)
    metadata: Dict[str, Any] = {
        "stream_length": transition_map.stream_length,
        "initial_state": transition_map.initial_state,
    }
    if transition_map.states is not None:
        metadata["states"] = list(transition_map.states)
    write_json(metadata, map_metadata_path(path))
    return path


def _read_map_metadata(path: Path) -> Dict[str, Any]:
    sidecar = map_metadata_path(path)
    if not sidecar.is_file():
        return {}
    try:
        payload = read_json(sidecar)
        metadata = {key: int(payload[key]) for key in ("stream_length", "initial_state")}
        if "states" in payload:
            metadata["states"] = tuple(int(s) for s in payload["states"])
    except ArtifactError as e:
        raise TransitionMapError(str(e)) from e
    except (KeyError, TypeError, ValueError) as e:
        raise TransitionMapError(f"{sidecar}: malformed map metadata: {e}") from e
    return metadata


def parse_map(
    path: Path | str,
    stream_length: Optional[int] = None,
    initial_state: Optional[int] = None,
) -> TransitionMap:
    """
    Read a transition map file.

    Stream length and initial state come from the arguments, then from the
    JSON file written beside the map, then from the events themselves.

    Args:
        path: CSV with start_index,duration,from_state,to_state
        stream_length: Stream length override
        initial_state: State at instance 0 override

    Returns:
        Validated TransitionMap

    Raises:
        TransitionMapError: Naming the first malformed or invalid row
    """
    path = Path(path)
    try:
        frame = _read_frame(path, MAP_COLUMNS, dtype=str, keep_default_na=False)
    except ArtifactError as e:
        raise TransitionMapError(str(e)) from e
    numbers = frame.apply(pd.to_numeric, errors="coerce")
    events = []
    for row, values in enumerate(numbers.itertuples(index=False), start=1):
        if any(pd.isna(v) or float(v) != int(v) for v in values):
            raise TransitionMapError("malformed row", row)
        try:
            events.append(TransitionEvent(*(int(v) for v in values)))
        except ValueError as e:
            raise TransitionMapError(str(e), row) from e
    metadata = _read_map_metadata(path)
    if initial_state is None:
        initial_state = metadata.get("initial_state")
    if initial_state is None:
        if not events:
            raise TransitionMapError(f"{path}: empty map needs an initial state")
        initial_state = events[0].from_state
    if stream_length is None:
        stream_length = metadata.get("stream_length")
    if stream_length is None:
        if not events:
            raise TransitionMapError(f"{path}: empty map needs a stream length")
        stream_length = events[-1].end_index
    return TransitionMap(tuple(events), initial_state, stream_length, metadata.get("states"))


def write_ground_truth(
    transition_map: TransitionMap,
    path: Path | str,
    gradual_duration: int = DEFAULT_GRADUAL_DURATION,
) -> Path:
    """Write events as start_index,end_index,from_state,to_state,type rows."""
    frame = pd.DataFrame(
        [
            (
                e.start_index,
                e.end_index,
                e.from_state,
                e.to_state,
                e.drift_type(gradual_duration).value,
            )
            for e in transition_map
        ],
        columns=list(GROUND_TRUTH_COLUMNS),
    )
    return _write_frame(frame, path)


def parse_ground_truth(
    path: Path | str, stream_length: int, initial_state: Optional[int] = None
) -> TransitionMap:
    """Read an events file back into a transition map."""
    frame = _read_frame(path, GROUND_TRUTH_COLUMNS)
    events = []
    for row, values in enumerate(frame.itertuples(index=False), start=1):
        try:
            start, end = int(values.start_index), int(values.end_index)
            events.append(
                TransitionEvent(start, end - start, int(values.from_state), int(values.to_state))
            )
        except (TypeError, ValueError) as e:
            raise TransitionMapError(str(e), row) from e
    if initial_state is None:
        initial_state = events[0].from_state if events else 1
    return TransitionMap(tuple(events), initial_state, stream_length)


# Streams

def write_stream(stream: SimulatedStream, path: Path | str) -> Path:
    """Write returns with per-instance annotations."""
    log = stream.log
    state_to = pd.array(log.state_to, dtype="Int64")
    state_to[~log.in_transition] = pd.NA
    frame = pd.DataFrame(
        {
            "index": np.arange(len(stream), dtype=np.int64),
            "return": stream.returns,
            "state_from": log.state_from,
            "state_to": state_to,
            "blend_weight": log.blend_weight,
        }
    )
    return _write_frame(frame, path)


def parse_stream(path: Path | str, seed: int = 0) -> SimulatedStream:
    """
    Read a stream file, recovering its transition map from the annotations.

    Raises:
        ArtifactError: If the file is malformed or its annotations are
            inconsistent
    """
    frame = _read_frame(path, STREAM_COLUMNS, dtype={"state_to": "Int64"})
    if not np.array_equal(frame["index"].to_numpy(), np.arange(len(frame))):
        raise ArtifactError(path, "index column must count from 0")
    in_transition = frame["state_to"].notna().to_numpy()
    state_to = frame["state_to"].fillna(0).to_numpy(dtype=np.int64)
    partial = GroundTruthLog(
        TransitionMap((), int(frame["state_from"].iloc[0]), len(frame)),
        frame["state_from"].to_numpy(dtype=np.int64),
        state_to,
        in_transition,
        frame["blend_weight"].to_numpy(dtype=float),
    )
    try:
        transition_map = partial.events_from_annotations()
    except TransitionMapError as e:
        raise ArtifactError(path, f"inconsistent annotations: {e}") from e
    log = GroundTruthLog(
        transition_map,
        partial.state_from,
        partial.state_to,
        partial.in_transition,
        partial.blend_weight,
    )
    return SimulatedStream(frame["return"].to_numpy(dtype=float), log, seed)


# Features and analysis outputs

def write_features(frame: pd.DataFrame, path: Path | str) -> Path:
    """Write a feature table."""
    return _write_frame(frame.loc[:, list(FEATURE_FILE_COLUMNS)], path)


def parse_features(path: Path | str) -> pd.DataFrame:
    """Read a feature table."""
    return _read_frame(path, FEATURE_FILE_COLUMNS)


def write_stats(table: pd.DataFrame, path: Path | str) -> Path:
    """Write a summary-statistics table with one row per feature."""
    return _write_frame(table, path, index=True, index_label="feature")


def write_histogram(hist: Histogram, path: Path | str) -> Path:
    """Write bin edges and counts."""
    frame = pd.DataFrame(
        {
            "bin_left": hist.edges[:-1],
            "bin_right": hist.edges[1:],
            "count": hist.counts.astype(np.int64),
        }
    )
    return _write_frame(frame, path)


def write_embedding(
    embedding: StateEmbedding, path: Path | str, meta_path: Path | str
) -> tuple[Path, Path]:
    """Write embedding points and a JSON sidecar describing the window."""
    frame = pd.DataFrame(
        {
            "x": embedding.velocity,
            "y": embedding.volatility,
            "state": embedding.state.astype(np.int64),
            "flag": embedding.in_transition.astype(np.int8),
        }
    )
    points = _write_frame(frame, path)
    meta = write_json(
        {
            "window": embedding.window,
            "x": "rolling mean of returns",
            "y": "rolling standard deviation of returns",
            "state": "state in force at the window end",
            "flag": "1 when the window end lies inside a transition",
            "points": len(embedding),
        },
        meta_path,
    )
    return points, meta


def write_clusters(
    result: ClusterResult, centroids_path: Path | str, assignments_path: Path | str
) -> tuple[Path, Path]:
    """Write centroids (one row per cluster) and per-point assignments."""
    centroids = pd.DataFrame(
        {
            "cluster": np.arange(result.centroids.shape[0], dtype=np.int64),
            "x": result.centroids[:, 0],
            "y": result.centroids[:, 1],
        }
    )
    assignments = pd.DataFrame({"cluster": result.assignments.astype(np.int64)})
    return (
        _write_frame(centroids, centroids_path),
        _write_frame(assignments, assignments_path),
    )
