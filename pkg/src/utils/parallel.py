"""Replica fan-out with deterministic ordering."""

import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from ..config import DEFAULT_WORKERS

logger = logging.getLogger(__name__)

T = TypeVar("T")


def replica_map(fn: Callable[[int], T], replica_ids: Iterable[int], workers: Optional[int] = None) -> List[T]:
    """
    Evaluate ``fn`` on every replica id and return results in replica-id order.

    Args:
        fn: Picklable callable taking a replica id (module-level function or partial)
        replica_ids: Replica ids to evaluate
        workers: Process count; defaults to POLYMERLAB_THREADS

    Returns:
        Results ordered by replica id, identical for any worker count
    """
    ids = sorted(int(r) for r in replica_ids)
    workers = DEFAULT_WORKERS if workers is None else max(1, int(workers))
    if workers == 1 or len(ids) < 2:
        return [fn(r) for r in ids]

    chunksize = max(1, len(ids) // (workers * 8))
    logger.debug(f"Dispatching {len(ids)} replicas to {workers} workers (chunksize={chunksize})")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, ids, chunksize=chunksize))
