"""
Transition maps: where regime changes happen and how long they take.
"""
import logging
from dataclasses import dataclass, field, replace
from enum import Enum, auto
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, TransitionMapError

logger = logging.getLogger(__name__)

DEFAULT_STREAM_LENGTH = 1_500_000
DEFAULT_INTERVAL = 5_000
DEFAULT_GRADUAL_DURATION = 1_000
DEFAULT_ABRUPT_DURATION = 100
DEFAULT_WARMUP_STEPS = 500
DEFAULT_SPLIT_INDEX = 500_000
SEED_LIMIT = 2**64

# Spawn keys separating the random streams derived from one seed
MAP_STREAM_KEY = 1
INNOVATION_STREAM_KEY = 2
INDEPENDENT_INNOVATION_STREAM_KEY = 3
BURN_IN_STREAM_KEY = 4


class DriftType(Enum):
    """Shape of a transition, derived from its duration."""
    ABRUPT = "abrupt"
    GRADUAL = "gradual"

    @classmethod
    def classify(cls, duration: int, gradual_duration: int) -> "DriftType":
        """Transitions at least as long as the gradual duration are gradual."""
        return cls.GRADUAL if duration >= gradual_duration else cls.ABRUPT


class EntryPolicy(Enum):
    """How a model's recursion state is prepared when it becomes active."""
    HANDOFF = "handoff"
    BURN_IN = "burn-in"


@dataclass(frozen=True)
class StreamConfig:
    """
    Settings shared by map generation and stream simulation.

    Attributes:
        length: Number of stream instances
        interval: Spacing between transition starts
        gradual_duration: Duration of gradual transitions
        abrupt_duration: Duration of abrupt transitions
        warmup_steps: Private burn-in steps before a model contributes
        seed: Base seed
        initial_state: State active at instance 0 of generated maps
        split_index: Train/test boundary recorded for downstream users
        neutralize_mean: Zero every model's constant mean term
        shared_innovations: Drive both models of a transition with one z
        entry_policy: Recursion-state preparation for incoming models
    """
    length: int = DEFAULT_STREAM_LENGTH
    interval: int = DEFAULT_INTERVAL
    gradual_duration: int = DEFAULT_GRADUAL_DURATION
    abrupt_duration: int = DEFAULT_ABRUPT_DURATION
    warmup_steps: int = DEFAULT_WARMUP_STEPS
    seed: int = 0
    initial_state: int = 1
    split_index: Optional[int] = DEFAULT_SPLIT_INDEX
    neutralize_mean: bool = False
    shared_innovations: bool = True
    entry_policy: EntryPolicy = EntryPolicy.HANDOFF

    def __post_init__(self) -> None:
        """Validate the configuration after initialization."""
        if self.length < 1:
            raise ConfigError(f"Stream length must be >= 1: {self.length}")
        if self.interval < 1:
            raise ConfigError(f"Interval must be >= 1: {self.interval}")
        if self.abrupt_duration < 1 or self.gradual_duration < 1:
            raise ConfigError("Transition durations must be >= 1")
        if self.abrupt_duration > self.gradual_duration:
            raise ConfigError(
                f"Abrupt duration {self.abrupt_duration} exceeds gradual duration "
                f"{self.gradual_duration}"
            )
        if self.interval <= self.gradual_duration:
            raise ConfigError(
                f"Interval {self.interval} must exceed the gradual duration "
                f"{self.gradual_duration}"
            )
        if self.warmup_steps < 0:
            raise ConfigError(f"Warm-up steps must be >= 0: {self.warmup_steps}")
        if not 0 <= self.seed < SEED_LIMIT:
            raise ConfigError(f"Seed must lie in [0, 2^64): {self.seed}")
        if self.initial_state < 1:
            raise ConfigError(f"Initial state must be >= 1: {self.initial_state}")
        if self.split_index is not None and self.split_index < 0:
            raise ConfigError(f"Split index must be >= 0: {self.split_index}")
        object.__setattr__(self, "entry_policy", EntryPolicy(self.entry_policy))

    def rng(self, *key: int) -> np.random.Generator:
        """Generator for one named random stream derived from the seed."""
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))


@dataclass(frozen=True)
class TransitionEvent:
    """One regime change: a blend from one state to another."""
    start_index: int
    duration: int
    from_state: int
    to_state: int

    def __post_init__(self) -> None:
        """Validate the event after initialization."""
        if self.start_index < 0:
            raise ValueError(f"Start index must be >= 0: {self.start_index}")
        if self.duration < 1:
            raise ValueError(f"Duration must be >= 1: {self.duration}")
        if self.from_state < 1 or self.to_state < 1:
            raise ValueError("State ids must be >= 1")
        if self.from_state == self.to_state:
            raise ValueError(f"Transition from state {self.from_state} to itself")

    @property
    def end_index(self) -> int:
        """First instance after the transition window."""
        return self.start_index + self.duration

    def drift_type(self, gradual_duration: int = DEFAULT_GRADUAL_DURATION) -> DriftType:
        """Abrupt or gradual, by duration."""
        return DriftType.classify(self.duration, gradual_duration)

    def __contains__(self, index: int) -> bool:
        return self.start_index <= index < self.end_index


class MapViolation(Enum):
    """Ways a sequence of transition events can be invalid."""
    OVERLAP = auto()
    BROKEN_CHAIN = auto()
    UNKNOWN_STATE = auto()
    OUT_OF_STREAM = auto()


@dataclass(frozen=True)
class MapValidationResult:
    """Result of a transition map validation check."""
    is_valid: bool
    error_type: Optional[MapViolation] = None
    error_message: Optional[str] = None
    row: Optional[int] = None


class MapValidator:
    """Validates ordering, chaining and bounds of transition events."""

    def __init__(
        self,
        stream_length: int,
        initial_state: int,
        states: Optional[Sequence[int]] = None,
    ) -> None:
        """
        Initialize the validator.

        Args:
            stream_length: Number of stream instances
            initial_state: State active at instance 0
            states: Known state ids, or None to accept any
        """
        self.stream_length = stream_length
        self.initial_state = initial_state
        self.states = None if states is None else frozenset(states)

    def _unknown(self, state: int) -> bool:
        return self.states is not None and state not in self.states

    def validate_events(self, events: Sequence[TransitionEvent]) -> MapValidationResult:
        """
        Validate a sequence of events.

        Rows in the result are 1-based positions in the sequence.

        Args:
            events: Events in stream order

        Returns:
            MapValidationResult for the first violation found
        """
        if self._unknown(self.initial_state):
            return MapValidationResult(
                False,
                MapViolation.UNKNOWN_STATE,
                f"Initial state {self.initial_state} has no model",
            )
        current = self.initial_state
        previous_end = 0
        for row, event in enumerate(events, start=1):
            if event.start_index < previous_end:
                return MapValidationResult(
                    False,
                    MapViolation.OVERLAP,
                    f"Transition starting at {event.start_index} overlaps the "
                    f"previous one ending at {previous_end}",
                    row,
                )
            if event.from_state != current:
                return MapValidationResult(
                    False,
                    MapViolation.BROKEN_CHAIN,
                    f"Transition leaves state {event.from_state} but state "
                    f"{current} is active",
                    row,
                )
            if self._unknown(event.to_state):
                return MapValidationResult(
                    False,
                    MapViolation.UNKNOWN_STATE,
                    f"State {event.to_state} has no model",
                    row,
                )
            if event.end_index > self.stream_length:
                return MapValidationResult(
                    False,
                    MapViolation.OUT_OF_STREAM,
                    f"Transition ends at {event.end_index}, past the stream "
                    f"length {self.stream_length}",
                    row,
                )
            current = event.to_state
            previous_end = event.end_index
        return MapValidationResult(True)


@dataclass(frozen=True)
class TransitionMap:
    """
    Ordered, non-overlapping, chained transitions over a stream.

    Construction validates the events and raises TransitionMapError naming the
    first offending row.
    """
    events: Tuple[TransitionEvent, ...]
    initial_state: int
    stream_length: int
    states: Optional[Tuple[int, ...]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        if self.stream_length < 1:
            raise TransitionMapError(f"Stream length must be >= 1: {self.stream_length}")
        result = MapValidator(
            self.stream_length, self.initial_state, self.states
        ).validate_events(self.events)
        if not result.is_valid:
            raise TransitionMapError(result.error_message or "invalid map", result.row)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[TransitionEvent]:
        return iter(self.events)

    def referenced_states(self) -> Tuple[int, ...]:
        """Every state the map visits, sorted."""
        visited = {self.initial_state}
        for event in self.events:
            visited.update((event.from_state, event.to_state))
        return tuple(sorted(visited))

    def final_state(self) -> int:
        """State active after the last transition."""
        return self.events[-1].to_state if self.events else self.initial_state

    def with_length(self, stream_length: int) -> "TransitionMap":
        """Same events over a stream of another length."""
        return TransitionMap(self.events, self.initial_state, stream_length, self.states)

    def count(self, drift: DriftType, gradual_duration: int = DEFAULT_GRADUAL_DURATION) -> int:
        """Number of events of one drift type."""
        return sum(1 for event in self.events if event.drift_type(gradual_duration) is drift)


def _rebalance_durations(events: List[TransitionEvent], config: StreamConfig) -> None:
    """Flip the latest event of the larger drift kind if the counts differ by two."""
    kinds = [e.drift_type(config.gradual_duration) for e in events]
    gradual = [i for i, kind in enumerate(kinds) if kind is DriftType.GRADUAL]
    abrupt = [i for i, kind in enumerate(kinds) if kind is DriftType.ABRUPT]
    if len(gradual) - len(abrupt) > 1:
        events[gradual[-1]] = replace(events[gradual[-1]], duration=config.abrupt_duration)
    elif len(abrupt) - len(gradual) > 1:
        events[abrupt[-1]] = replace(events[abrupt[-1]], duration=config.gradual_duration)


def generate_map(config: StreamConfig, n_states: int) -> TransitionMap:
    """
    Place transitions at regular intervals with random targets and durations.

    Transition k starts at k * interval. The last transition is pulled back so
    it ends inside the stream, or dropped if it then overlaps its predecessor;
    one remaining duration is flipped if the drop unbalances the mix. Target states are uniform over the states other
    than the current one, and durations are an even mix of abrupt and gradual
    in random order.

    Args:
        config: Stream settings; seed, length, interval and durations are used
        n_states: Number of states, ids 1..n_states

    Returns:
        TransitionMap over config.length instances

    Raises:
        ConfigError: If fewer than two states are given or the initial state
            is unknown
    """
    if n_states < 2:
        raise ConfigError(f"At least two states are required: {n_states}")
    if not 1 <= config.initial_state <= n_states:
        raise ConfigError(
            f"Initial state {config.initial_state} is not in 1..{n_states}"
        )
    if config.length % config.interval:
        logger.warning(
            "Stream length %d is not a multiple of the interval %d",
            config.length,
            config.interval,
        )

    rng = config.rng(MAP_STREAM_KEY)
    n_events = config.length // config.interval
    n_gradual = n_events // 2 + (int(rng.integers(2)) if n_events % 2 else 0)
    durations = np.array(
        [config.gradual_duration] * n_gradual
        + [config.abrupt_duration] * (n_events - n_gradual),
        dtype=np.int64,
    )
    rng.shuffle(durations)

    events: List[TransitionEvent] = []
    current = config.initial_state
    previous_end = 0
    dropped = False
    for k, duration in enumerate(durations.tolist(), start=1):
        offset = int(rng.integers(n_states - 1)) + 1
        target = (current - 1 + offset) % n_states + 1
        start = min(k * config.interval, config.length - duration)
        if start < previous_end or start < 0:
            logger.warning(
                "Dropping transition %d: it does not fit before the stream end", k
            )
            dropped = True
            continue
        events.append(TransitionEvent(start, duration, current, target))
        current = target
        previous_end = start + duration
    if dropped:
        _rebalance_durations(events, config)

    transition_map = TransitionMap(
        tuple(events), config.initial_state, config.length, tuple(range(1, n_states + 1))
    )
    logger.info(
        "Generated %d transitions (%d gradual, %d abrupt) over %d instances",
        len(transition_map),
        transition_map.count(DriftType.GRADUAL, config.gradual_duration),
        transition_map.count(DriftType.ABRUPT, config.gradual_duration),
        config.length,
    )
    return transition_map
