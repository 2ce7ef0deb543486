"""Deterministic fan-out of independent work items."""
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from app.core.config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def worker_count(max_workers: Optional[int] = None) -> int:
    """Resolve the worker cap (explicit value, else settings)."""
    return max(1, int(max_workers or settings.max_workers))


def parallel_map(fn: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None) -> List[R]:
    """
    Apply fn to every item, results in input order.

    Args:
        fn: Pure function of one item
        items: Work items
        max_workers: Thread cap; defaults to settings.max_workers

    Returns:
        List of results, same order as items
    """
    items = list(items)
    workers = min(worker_count(max_workers), max(1, len(items)))
    if workers == 1:
        return [fn(item) for item in items]

    logger.debug(f"Fanning out {len(items)} items over {workers} threads")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
