"""
Regime-switching stream simulation with per-instance ground truth.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass, replace
from functools import partial
from typing import Deque, Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
from typing_extensions import Self

from .econometrics import RecursionState, RegimeModel, burn_in, neutralize_mean, step
from .errors import (
    ConfigError,
    StreamGenerationError,
    TransitionMapError,
    VarianceExplosionError,
)
from .transition_map import (
    BURN_IN_STREAM_KEY,
    INDEPENDENT_INNOVATION_STREAM_KEY,
    INNOVATION_STREAM_KEY,
    EntryPolicy,
    StreamConfig,
    TransitionEvent,
    TransitionMap,
)
from .worker_pool import (
    ExecutorKind,
    cap_workers_for_memory,
    ProgressCallback,
    run_ordered,
)

logger = logging.getLogger(__name__)

SIGMOID_STEEPNESS = 10.0
# Rough peak bytes per simulated instance: returns, annotations and features
BYTES_PER_INSTANCE = 256

Models = Union[Mapping[int, RegimeModel], Iterable[RegimeModel]]


def sigmoid_weight(t: int, start: int, duration: int) -> float:
    """
    Weight of the incoming model at instance t of a transition.

    Args:
        t: Stream instance
        start: First instance of the transition
        duration: Transition length

    Returns:
        0 before the window, 1 after it, a logistic ramp centred on the
        window midpoint inside it
    """
    if duration < 1:
        raise ValueError(f"Duration must be >= 1: {duration}")
    if t < start:
        return 0.0
    if t >= start + duration:
        return 1.0
    exponent = -(SIGMOID_STEEPNESS / duration) * (t - start - duration / 2.0)
    return 1.0 / (1.0 + math.exp(exponent))


def transition_weights(event: TransitionEvent) -> np.ndarray:
    """Blend weights over an event's window."""
    return np.array(
        [
            sigmoid_weight(t, event.start_index, event.duration)
            for t in range(event.start_index, event.end_index)
        ]
    )


@dataclass(frozen=True, eq=False)
class GroundTruthLog:
    """
    Per-instance annotations of a simulated stream.

    Attributes:
        transition_map: Events the annotations were derived from
        state_from: Regime in force, or the outgoing regime during a transition
        state_to: Incoming regime during a transition, 0 elsewhere
        in_transition: Whether the instance lies inside a transition window
        blend_weight: Weight of the incoming regime, 0 outside transitions
    """
    transition_map: TransitionMap
    state_from: np.ndarray
    state_to: np.ndarray
    in_transition: np.ndarray
    blend_weight: np.ndarray

    @classmethod
    def from_map(cls, transition_map: TransitionMap) -> Self:
        """Expand a transition map into per-instance annotations."""
        length = transition_map.stream_length
        state_from = np.empty(length, dtype=np.int64)
        state_to = np.zeros(length, dtype=np.int64)
        in_transition = np.zeros(length, dtype=bool)
        blend_weight = np.zeros(length)

        cursor = 0
        current = transition_map.initial_state
        for event in transition_map:
            state_from[cursor:event.start_index] = current
            window = slice(event.start_index, event.end_index)
            state_from[window] = event.from_state
            state_to[window] = event.to_state
            in_transition[window] = True
            blend_weight[window] = transition_weights(event)
            current = event.to_state
            cursor = event.end_index
        state_from[cursor:] = current
        return cls(transition_map, state_from, state_to, in_transition, blend_weight)

    def __len__(self) -> int:
        return int(self.state_from.shape[0])

    @property
    def active_state(self) -> np.ndarray:
        """Dominant regime: the incoming one once its weight reaches one half."""
        incoming = self.in_transition & (self.blend_weight >= 0.5)
        return np.where(incoming, self.state_to, self.state_from)

    def events_from_annotations(self) -> TransitionMap:
        """Recover the transition map from the per-instance columns."""
        if len(self) == 0:
            raise ConfigError("Cannot recover events from an empty log")
        inside = np.flatnonzero(self.in_transition)
        events: List[TransitionEvent] = []
        if inside.size:
            breaks = np.flatnonzero(
                (np.diff(inside) != 1)
                | (np.diff(self.state_from[inside]) != 0)
                | (np.diff(self.state_to[inside]) != 0)
            )
            starts = np.concatenate(([inside[0]], inside[breaks + 1]))
            ends = np.concatenate((inside[breaks], [inside[-1]])) + 1
            for start, end in zip(starts.tolist(), ends.tolist()):
                events.append(
                    TransitionEvent(
                        start,
                        end - start,
                        int(self.state_from[start]),
                        int(self.state_to[start]),
                    )
                )
        return TransitionMap(tuple(events), int(self.state_from[0]), len(self))

    def equals(self, other: "GroundTruthLog") -> bool:
        """Element-wise equality of every annotation column."""
        return (
            self.transition_map == other.transition_map
            and np.array_equal(self.state_from, other.state_from)
            and np.array_equal(self.state_to, other.state_to)
            and np.array_equal(self.in_transition, other.in_transition)
            and np.array_equal(self.blend_weight, other.blend_weight)
        )


@dataclass(frozen=True, eq=False)
class SimulatedStream:
    """Simulated log-returns with their ground truth."""
    returns: np.ndarray
    log: GroundTruthLog
    seed: int

    def __len__(self) -> int:
        return int(self.returns.shape[0])

    def equals(self, other: "SimulatedStream") -> bool:
        """Bitwise equality of returns and annotations."""
        return np.array_equal(self.returns, other.returns) and self.log.equals(other.log)


def model_registry(models: Models) -> Dict[int, RegimeModel]:
    """
    Index models by state id.

    Raises:
        ConfigError: If two models share a state id
    """
    values = models.values() if isinstance(models, Mapping) else models
    registry: Dict[int, RegimeModel] = {}
    for model in values:
        if model.state_id in registry:
            raise ConfigError(f"Duplicate model for state {model.state_id}")
        registry[model.state_id] = model
    return registry


def stream_seed(base_seed: int, index: int) -> int:
    """Seed of stream ``index`` in a batch, mixed from the base seed."""
    state = np.random.SeedSequence([base_seed, index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


class _StreamRunner:
    """Walks the map segment by segment, blending models inside transitions."""

    def __init__(
        self,
        models: Dict[int, RegimeModel],
        transition_map: TransitionMap,
        config: StreamConfig,
    ) -> None:
        self.models = models
        self.transition_map = transition_map
        self.config = config
        self.returns = np.empty(config.length)
        self.z = config.rng(INNOVATION_STREAM_KEY).standard_normal(config.length).tolist()
        if config.shared_innovations:
            self.z_incoming = self.z
        else:
            independent = config.rng(INDEPENDENT_INNOVATION_STREAM_KEY)
            self.z_incoming = independent.standard_normal(config.length).tolist()
        depth = max(max(model.arma.p for model in models.values()), 1)
        self.states: Dict[int, RecursionState] = {}
        self.history: Deque[float] = deque(maxlen=depth)
        self._prepare(depth)

    def _burn_in(self, state_id: int, depth: int) -> Tuple[RecursionState, Deque[float]]:
        rng = self.config.rng(BURN_IN_STREAM_KEY, state_id)
        return burn_in(self.models[state_id], self.config.warmup_steps, rng, depth)

    def _prepare(self, depth: int) -> None:
        initial = self.transition_map.initial_state
        state, history = self._burn_in(initial, depth)
        self.states[initial] = state
        self.history.extend(history)
        if self.config.entry_policy is EntryPolicy.BURN_IN:
            for state_id in self.transition_map.referenced_states():
                if state_id != initial:
                    self.states[state_id], _ = self._burn_in(state_id, depth)

    def _enter(self, event: TransitionEvent) -> None:
        if self.config.entry_policy is EntryPolicy.HANDOFF:
            outgoing = self.states[event.from_state]
            self.states[event.to_state] = outgoing.handoff(self.models[event.to_state])

    def run_steady(self, state_id: int, start: int, stop: int) -> None:
        model = self.models[state_id]
        state = self.states[state_id]
        for t in range(start, stop):
            try:
                result = step(model, state, self.history, self.z[t])
            except VarianceExplosionError as e:
                raise VarianceExplosionError(t, (state_id,)) from e
            self.returns[t] = result.simulated_return
            self.history.appendleft(result.simulated_return)

    def run_transition(self, event: TransitionEvent) -> None:
        self._enter(event)
        outgoing = self.models[event.from_state]
        incoming = self.models[event.to_state]
        outgoing_state = self.states[event.from_state]
        incoming_state = self.states[event.to_state]
        weights = transition_weights(event).tolist()
        for offset, t in enumerate(range(event.start_index, event.end_index)):
            try:
                a = step(outgoing, outgoing_state, self.history, self.z[t])
                b = step(incoming, incoming_state, self.history, self.z_incoming[t])
            except VarianceExplosionError as e:
                raise VarianceExplosionError(
                    t, (event.from_state, event.to_state)
                ) from e
            w = weights[offset]
            blended = a.simulated_return + w * (b.simulated_return - a.simulated_return)
            self.returns[t] = blended
            self.history.appendleft(blended)


def simulate_stream(
    models: Models,
    transition_map: TransitionMap,
    config: StreamConfig,
    progress_callback: Optional[ProgressCallback] = None,
) -> SimulatedStream:
    """
    Simulate one regime-switching stream.

    Each instance outside a transition is one step of the active model. Inside
    a transition both models step on the shared return history and their
    outputs are blended with the sigmoid weight of the incoming model.

    Args:
        models: Regime models keyed or tagged by state id
        transition_map: Where the transitions happen
        config: Length, seed and simulation options
        progress_callback: Receives (percent, message) after each transition

    Returns:
        SimulatedStream with returns and ground truth

    Raises:
        ConfigError: If the map references a state without a model or does not
            fit in the stream
        VarianceExplosionError: If a conditional variance stops being finite
    """
    registry = model_registry(models)
    missing = [s for s in transition_map.referenced_states() if s not in registry]
    if missing:
        raise ConfigError(f"No model for state(s) {missing}")
    if transition_map.stream_length != config.length:
        try:
            transition_map = transition_map.with_length(config.length)
        except TransitionMapError as e:
            raise ConfigError(
                f"Transition map does not fit a stream of length {config.length}: {e}"
            ) from e
    if config.neutralize_mean:
        registry = {state_id: neutralize_mean(m) for state_id, m in registry.items()}

    runner = _StreamRunner(registry, transition_map, config)
    cursor = 0
    current = transition_map.initial_state
    total = len(transition_map)
    for number, event in enumerate(transition_map, start=1):
        runner.run_steady(current, cursor, event.start_index)
        runner.run_transition(event)
        current = event.to_state
        cursor = event.end_index
        if progress_callback is not None:
            progress_callback(number * 100 // (total + 1), f"Transition {number}/{total}")
    runner.run_steady(current, cursor, config.length)
    if progress_callback is not None:
        progress_callback(100, "Stream complete")

    logger.debug(
        "Simulated %d instances with %d transitions (seed %d)",
        config.length,
        total,
        config.seed,
    )
    return SimulatedStream(runner.returns, GroundTruthLog.from_map(transition_map), config.seed)


def _simulate_seeded(
    models: Tuple[RegimeModel, ...],
    transition_map: TransitionMap,
    config: StreamConfig,
    index: int,
) -> SimulatedStream:
    seeded = replace(config, seed=stream_seed(config.seed, index))
    return simulate_stream(models, transition_map, seeded)


def _wrap_failure(index: int, error: Exception) -> Exception:
    return StreamGenerationError(index, error)


def simulate_batch(
    models: Models,
    transition_map: TransitionMap,
    config: StreamConfig,
    n_streams: int,
    workers: int = 1,
    progress_callback: Optional[ProgressCallback] = None,
) -> List[SimulatedStream]:
    """
    Simulate independent streams over one shared transition map.

    Stream i uses the seed mixed from (config.seed, i), so results do not
    depend on the worker count.

    Args:
        models: Regime models keyed or tagged by state id
        transition_map: Map shared by every stream
        config: Settings; config.seed is the base seed
        n_streams: Number of streams
        workers: Worker processes
        progress_callback: Receives (percent, message) as streams finish

    Returns:
        Streams in index order

    Raises:
        ConfigError: If n_streams is less than 1
        StreamGenerationError: For the first failing stream by index
    """
    if n_streams < 1:
        raise ConfigError(f"Stream count must be >= 1: {n_streams}")
    registry = tuple(model_registry(models).values())
    workers = cap_workers_for_memory(
        min(workers, n_streams), config.length * BYTES_PER_INSTANCE
    )
    logger.info(
        "Simulating %d stream(s) of %d instances on %d worker(s)",
        n_streams,
        config.length,
        workers,
    )
    tasks = [
        partial(_simulate_seeded, registry, transition_map, config, index)
        for index in range(n_streams)
    ]
    return run_ordered(
        tasks,
        workers=workers,
        kind=ExecutorKind.PROCESS,
        progress_callback=progress_callback,
        error_factory=_wrap_failure,
        label="Stream",
    )
