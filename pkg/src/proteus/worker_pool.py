"""
Ordered parallel execution of independent tasks.
"""
import logging
from concurrent.futures import (
    Executor,
    Future,
    ProcessPoolExecutor,
    ThreadPoolExecutor,
    as_completed,
)
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, TypeVar

import psutil

logger = logging.getLogger(__name__)

T = TypeVar("T")

ProgressCallback = Callable[[int, str], None]
ErrorFactory = Callable[[int, Exception], Exception]


class ExecutorKind(Enum):
    """Kind of pool used for parallel work."""
    THREAD = "thread"
    PROCESS = "process"


class MemoryPressure:
    """Monitors system memory available to worker pools."""

    # Share of available memory a pool may plan to use
    HEADROOM_FRACTION = 0.5

    @staticmethod
    def get_system_memory_usage() -> float:
        """Get system memory usage percentage."""
        return psutil.virtual_memory().percent

    @staticmethod
    def get_available_bytes() -> int:
        """Get memory available to new allocations."""
        return int(psutil.virtual_memory().available)


def cap_workers_for_memory(workers: int, bytes_per_task: int) -> int:
    """
    Limit the worker count so concurrent tasks fit in available memory.

    Args:
        workers: Requested worker count
        bytes_per_task: Estimated peak memory of one task

    Returns:
        Worker count, at least 1
    """
    if bytes_per_task <= 0:
        return max(1, workers)
    budget = MemoryPressure.get_available_bytes() * MemoryPressure.HEADROOM_FRACTION
    affordable = max(1, int(budget // bytes_per_task))
    if affordable < workers:
        logger.warning(
            "Reducing workers from %d to %d (memory usage %.0f%%)",
            workers,
            affordable,
            MemoryPressure.get_system_memory_usage(),
        )
        return affordable
    return max(1, workers)


def default_workers() -> int:
    """Physical core count, falling back to logical cores."""
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def _make_executor(kind: ExecutorKind, workers: int) -> Executor:
    if kind is ExecutorKind.PROCESS:
        return ProcessPoolExecutor(max_workers=workers)
    return ThreadPoolExecutor(max_workers=workers)


def run_ordered(
    tasks: Sequence[Callable[[], T]],
    workers: int = 1,
    kind: ExecutorKind = ExecutorKind.THREAD,
    progress_callback: Optional[ProgressCallback] = None,
    error_factory: Optional[ErrorFactory] = None,
    label: str = "Task",
) -> List[T]:
    """
    Run independent tasks and return their results in submission order.

    Results never depend on the worker count or on completion order.

    Args:
        tasks: Zero-argument callables; picklable for process pools
        workers: Number of workers, 1 runs inline
        kind: Pool kind
        progress_callback: Receives (percent, message) as tasks finish
        error_factory: Wraps a failure with its task index
        label: Task name used in progress messages

    Returns:
        One result per task, in task order

    Raises:
        ValueError: If workers is less than 1
        Exception: The first failure by task index, wrapped by error_factory
    """
    if workers < 1:
        raise ValueError(f"Worker count must be >= 1: {workers}")
    total = len(tasks)

    def report(done: int) -> None:
        if progress_callback is not None and total:
            progress_callback(done * 100 // total, f"{label} {done}/{total}")

    if workers == 1 or total <= 1:
        results: List[T] = []
        for index, task in enumerate(tasks):
            try:
                results.append(task())
            except Exception as e:
                logger.debug("%s %d failed: %s", label, index, str(e))
                if error_factory is None:
                    raise
                raise error_factory(index, e) from e
            report(index + 1)
        return results

    logger.debug("Running %d tasks on %d %s workers", total, workers, kind.value)
    outcomes: Dict[int, T] = {}
    failures: Dict[int, Exception] = {}
    with _make_executor(kind, min(workers, total)) as executor:
        futures: Dict[Future[T], int] = {
            executor.submit(task): index for index, task in enumerate(tasks)
        }
        for done, future in enumerate(as_completed(futures), start=1):
            index = futures[future]
            try:
                outcomes[index] = future.result()
            except Exception as e:
                logger.debug("%s %d failed: %s", label, index, str(e))
                failures[index] = e
            report(done)
    if failures:
        first = min(failures)
        if error_factory is None:
            raise failures[first]
        raise error_factory(first, failures[first]) from failures[first]
    return [outcomes[index] for index in range(total)]
