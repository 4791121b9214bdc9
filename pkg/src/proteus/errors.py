"""
Exception hierarchy for the stream generator.

Every error raised on purpose by this package derives from ProteusError, so the
command line can map the whole family onto a single exit code. Errors that
carry structured context define ``__reduce__`` so they survive the trip back
from worker processes.
"""
from pathlib import Path
from typing import Any, Optional, Sequence


class ProteusError(Exception):
    """Base exception for all generator errors."""
    pass


class ConfigError(ProteusError):
    """Raised when a configuration value is out of range or inconsistent."""
    pass


class ModelValidationError(ProteusError):
    """Raised when ARMA-GARCH parameters violate stationarity or positivity."""
    pass


class LikelihoodOverflowError(ProteusError):
    """Raised when a likelihood evaluation produces non-finite values."""
    pass


class DegenerateInputError(ProteusError):
    """Raised when a return series has zero variance."""
    pass


class FitError(ProteusError):
    """Raised when no grid candidate could be fitted."""
    pass


class VarianceExplosionError(ProteusError):
    """Raised when a simulated conditional variance stops being finite."""

    def __init__(
        self,
        step_index: int,
        state_ids: Sequence[int] = (),
        detail: str = "",
    ) -> None:
        self.step_index = step_index
        self.state_ids = tuple(state_ids)
        self.detail = detail
        states = ", ".join(str(s) for s in self.state_ids) or "unknown"
        message = f"Variance explosion at step {step_index} (states: {states})"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)

    def __reduce__(self) -> tuple[Any, ...]:
        return (type(self), (self.step_index, self.state_ids, self.detail))


class TransitionMapError(ProteusError):
    """Raised when a transition map is malformed or breaks its invariants."""

    def __init__(self, message: str, row: Optional[int] = None) -> None:
        self.row = row
        self.reason = message
        if row is not None:
            message = f"Row {row}: {message}"
        super().__init__(message)

    def __reduce__(self) -> tuple[Any, ...]:
        return (type(self), (self.reason, self.row))


class StreamGenerationError(ProteusError):
    """Raised when one stream of a batch fails."""

    def __init__(self, stream_index: int, cause: Exception) -> None:
        self.stream_index = stream_index
        self.cause = cause
        super().__init__(f"Stream {stream_index} failed: {cause}")

    def __reduce__(self) -> tuple[Any, ...]:
        return (type(self), (self.stream_index, self.cause))


class IndicatorError(ProteusError):
    """Raised when an indicator column cannot be computed."""

    def __init__(self, column: str, message: str) -> None:
        self.column = column
        self.reason = message
        super().__init__(f"Indicator '{column}': {message}")

    def __reduce__(self) -> tuple[Any, ...]:
        return (type(self), (self.column, self.reason))


class BarFileError(ProteusError):
    """Raised when a market bar file fails to parse or validate."""

    def __init__(self, message: str, row: Optional[int] = None) -> None:
        self.row = row
        self.reason = message
        if row is not None:
            message = f"Row {row}: {message}"
        super().__init__(message)

    def __reduce__(self) -> tuple[Any, ...]:
        return (type(self), (self.reason, self.row))


class ArtifactError(ProteusError):
    """Raised when an output artifact cannot be written or parsed."""

    def __init__(self, path: Path | str, message: str) -> None:
        self.path = Path(path)
        self.reason = message
        super().__init__(f"{self.path}: {message}")

    def __reduce__(self) -> tuple[Any, ...]:
        return (type(self), (self.path, self.reason))


class ManifestError(ArtifactError):
    """Raised when manifest verification fails."""
    pass
