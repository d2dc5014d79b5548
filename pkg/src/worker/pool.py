"""Frame-parallel execution capped by the ISAC_SPU_THREADS setting."""

import logging
from concurrent import futures
from typing import Callable, Iterable, List, Optional, TypeVar

from common import config

logger = logging.getLogger(__name__)

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")


def worker_count(n_items: int, threads: Optional[int] = None) -> int:
    """Threads to use for ``n_items`` independent frames."""
    return max(1, min(threads or config.settings.threads, n_items))


def run_parallel(
    fn: Callable[[ItemT], ResultT], items: Iterable[ItemT], threads: Optional[int] = None
) -> List[ResultT]:
    """Map ``fn`` over ``items`` on a thread pool, keeping the input order.

    The first exception raised by ``fn`` propagates once its item is reached.
    """
    items = list(items)
    workers = worker_count(len(items), threads)
    if workers == 1:
        return [fn(item) for item in items]
    logger.info("Running %s frames on %s threads.", len(items), workers)
    with futures.ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(fn, items))
