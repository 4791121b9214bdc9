"""
Validation statistics for generated streams: summaries, histograms, state
embeddings, clustering and class balance.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from sklearn.cluster import kmeans_plusplus
from sklearn.metrics.cluster import contingency_matrix

from .errors import ConfigError, DegenerateInputError
from .features import FEATURE_COLUMNS
from .stream_simulation import GroundTruthLog

logger = logging.getLogger(__name__)

STATS_COLUMNS = ("mean", "std", "min", "25%", "50%", "75%", "max")
DEFAULT_EMBEDDING_WINDOW = 50
DEFAULT_CLUSTERS = 4
DEFAULT_BINS = 50
DEFAULT_MAX_ITERATIONS = 300
DEFAULT_TOLERANCE = 1e-6
DEFAULT_INITIALIZATIONS = 10


@dataclass(frozen=True)
class AnalysisConfig:
    """Settings of the analyze stage."""
    window: int = DEFAULT_EMBEDDING_WINDOW
    bins: int = DEFAULT_BINS
    k: int = DEFAULT_CLUSTERS
    seed: int = 0
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tolerance: float = DEFAULT_TOLERANCE
    n_init: int = DEFAULT_INITIALIZATIONS

    def __post_init__(self) -> None:
        for name in ("window", "bins", "k", "max_iterations", "n_init"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1: {getattr(self, name)}")
        if not self.tolerance >= 0:
            raise ConfigError(f"tolerance must be >= 0: {self.tolerance}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0: {self.seed}")


def describe(features: pd.DataFrame, columns: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Summary statistics per feature column.

    Standard deviations use ddof=1 and quantiles linear interpolation.

    Args:
        features: Feature table
        columns: Columns to summarize, defaults to every feature column present

    Returns:
        DataFrame indexed by feature with the statistics as columns

    Raises:
        DegenerateInputError: If the table has no rows
    """
    if columns is None:
        columns = [name for name in FEATURE_COLUMNS if name in features.columns]
    if len(features) == 0 or not columns:
        raise DegenerateInputError("Cannot summarize an empty feature table")
    summary = features.loc[:, list(columns)].describe(percentiles=[0.25, 0.5, 0.75])
    table = summary.T.loc[:, list(STATS_COLUMNS)]
    table.index.name = "feature"
    return table


@dataclass(frozen=True, eq=False)
class Histogram:
    """Fixed-width bin counts over a closed range."""
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        """Number of values that fell inside the range."""
        return int(self.counts.sum())


def histogram(
    values: Sequence[float], bins: int, value_range: Tuple[float, float]
) -> Histogram:
    """
    Count values into fixed-width bins; values outside the range are ignored.

    Raises:
        ConfigError: If bins is less than 1 or the range is empty or inverted
    """
    if bins < 1:
        raise ConfigError(f"Bin count must be >= 1: {bins}")
    low, high = value_range
    if not (np.isfinite(low) and np.isfinite(high)) or low >= high:
        raise ConfigError(f"Invalid histogram range: [{low}, {high}]")
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=(low, high))
    return Histogram(edges, counts)


def value_range(values: Sequence[float]) -> Tuple[float, float]:
    """Range of the values, widened when they are all equal."""
    array = np.asarray(values, dtype=float)
    if array.size == 0:
        raise DegenerateInputError("Cannot take the range of no values")
    low, high = float(np.min(array)), float(np.max(array))
    if low == high:
        pad = max(abs(low), 1.0) * 1e-6
        return low - pad, high + pad
    return low, high


def state_histograms(
    returns: Sequence[float],
    log: GroundTruthLog,
    bins: int,
    value_range: Tuple[float, float],
) -> Dict[int, Histogram]:
    """Histogram of returns outside transitions, one per active state."""
    r = np.asarray(returns, dtype=float)
    steady = ~log.in_transition
    result: Dict[int, Histogram] = {}
    for state_id in np.unique(log.state_from[steady]).tolist():
        mask = steady & (log.state_from == state_id)
        result[int(state_id)] = histogram(r[mask], bins, value_range)
    return result


@dataclass(frozen=True, eq=False)
class StateEmbedding:
    """Rolling (velocity, volatility) points tagged with ground truth."""
    velocity: np.ndarray
    volatility: np.ndarray
    state: np.ndarray
    in_transition: np.ndarray
    end_index: np.ndarray
    window: int

    def __len__(self) -> int:
        return int(self.velocity.shape[0])

    @property
    def points(self) -> np.ndarray:
        """(n, 2) array of velocity and volatility."""
        return np.column_stack((self.velocity, self.volatility))


def embed_states(
    returns: Sequence[float],
    log: GroundTruthLog,
    window: int = DEFAULT_EMBEDDING_WINDOW,
) -> StateEmbedding:
    """
    Embed each full window of returns as its mean and standard deviation.

    A point is tagged with the state in force at the window's last instance,
    and flagged when that instance lies inside a transition.

    Raises:
        ConfigError: If the window is not shorter than the stream
    """
    r = np.asarray(returns, dtype=float)
    if window < 1 or r.size < window:
        raise ConfigError(f"Window {window} does not fit a stream of {r.size} returns")
    if len(log) != r.size:
        raise ConfigError("Ground truth and returns differ in length")
    rolling = pd.Series(r).rolling(window)
    velocity = rolling.mean().to_numpy()[window - 1:]
    volatility = rolling.std(ddof=0).to_numpy()[window - 1:]
    ends = np.arange(window - 1, r.size, dtype=np.int64)
    return StateEmbedding(
        velocity,
        volatility,
        log.state_from[ends],
        log.in_transition[ends],
        ends,
        window,
    )


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """Output of k-means clustering."""
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    inertia_history: Tuple[float, ...]
    iterations: int
    purity: Optional[float] = None


def purity(assignments: Sequence[int], labels: Sequence[int]) -> float:
    """Share of points whose cluster's majority label matches their own."""
    contingency = contingency_matrix(labels, assignments)
    return float(contingency.max(axis=0).sum() / contingency.sum())


def _lloyd(
    points: np.ndarray,
    centroids: np.ndarray,
    max_iterations: int,
    tolerance: float,
) -> Tuple[np.ndarray, np.ndarray, List[float], int]:
    history: List[float] = []
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        distances = cdist(points, centroids, "sqeuclidean")
        assignments = np.argmin(distances, axis=1)
        nearest = distances[np.arange(points.shape[0]), assignments]
        history.append(float(nearest.sum()))

        updated = centroids.copy()
        taken: set[int] = set()
        for cluster in range(centroids.shape[0]):
            members = points[assignments == cluster]
            if members.shape[0]:
                updated[cluster] = members.mean(axis=0)
                continue
            # Empty cluster: move it onto the farthest unused point
            for candidate in np.argsort(-nearest, kind="stable").tolist():
                if candidate not in taken:
                    taken.add(candidate)
                    updated[cluster] = points[candidate]
                    break
        shift = float(np.max(np.linalg.norm(updated - centroids, axis=1)))
        centroids = updated
        if shift <= tolerance:
            break
    distances = cdist(points, centroids, "sqeuclidean")
    assignments = np.argmin(distances, axis=1)
    history.append(float(distances[np.arange(points.shape[0]), assignments].sum()))
    return centroids, assignments, history, iterations


def kmeans(
    points: np.ndarray,
    k: int = DEFAULT_CLUSTERS,
    seed: int = 0,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    tolerance: float = DEFAULT_TOLERANCE,
    n_init: int = DEFAULT_INITIALIZATIONS,
    labels: Optional[Sequence[int]] = None,
) -> ClusterResult:
    """
    Lloyd's k-means with k-means++ seeding.

    Each of the n_init seedings is drawn deterministically from ``seed`` and
    the run with the lowest final inertia is kept.

    Args:
        points: (n, d) array
        k: Number of clusters
        seed: Base seed of the seedings
        max_iterations: Lloyd iterations per run
        tolerance: Largest centroid shift that counts as converged
        n_init: Number of seedings
        labels: Ground-truth labels used to report purity

    Returns:
        ClusterResult of the best run

    Raises:
        ConfigError: If there are fewer points than clusters
    """
    x = np.asarray(points, dtype=float)
    if x.ndim != 2:
        raise ConfigError("Points must be a two-dimensional array")
    if k < 1 or x.shape[0] < k:
        raise ConfigError(f"Cannot form {k} clusters from {x.shape[0]} points")
    if n_init < 1 or max_iterations < 1:
        raise ConfigError("n_init and max_iterations must be >= 1")

    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=n_init)
    best: Optional[ClusterResult] = None
    for run_seed in seeds.tolist():
        initial, _ = kmeans_plusplus(x, n_clusters=k, random_state=run_seed)
        centroids, assignments, history, iterations = _lloyd(
            x, np.asarray(initial, dtype=float), max_iterations, tolerance
        )
        if best is None or history[-1] < best.inertia:
            best = ClusterResult(
                centroids, assignments, history[-1], tuple(history), iterations
            )
    assert best is not None
    if labels is not None:
        best = ClusterResult(
            best.centroids,
            best.assignments,
            best.inertia,
            best.inertia_history,
            best.iterations,
            purity(best.assignments, labels),
        )
    logger.debug(
        "k-means: k=%d inertia %.6g after %d iterations", k, best.inertia, best.iterations
    )
    return best


def class_balance(labels: Sequence[int]) -> float:
    """
    Fraction of labels equal to 0.

    Raises:
        DegenerateInputError: If there are no labels
    """
    array = np.asarray(labels)
    if array.size == 0:
        raise DegenerateInputError("Cannot compute class balance of no labels")
    return float(np.mean(array == 0))
