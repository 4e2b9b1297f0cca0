"""
Parameter sweeps over a thread pool.

Worker count comes from the argument, else GABOR_EB_THREADS (0 = one per CPU). Results are
returned in input order whatever the scheduling.
"""

from __future__ import annotations
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from core.errors import ConfigError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(workers: Optional[int] = None) -> int:
    if workers is None:
        raw = os.getenv("GABOR_EB_THREADS", "").strip()
        if not raw:
            workers = 0
        else:
            try:
                workers = int(raw)
            except ValueError as e:
                raise ConfigError(f"GABOR_EB_THREADS must be an integer, got {raw!r}", key="GABOR_EB_THREADS") from e
    if workers < 0:
        raise ConfigError(f"worker count must be >= 0, got {workers}", key="GABOR_EB_THREADS")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers


def run_sweep(items: Sequence[T], fn: Callable[[T], R], workers: Optional[int] = None) -> List[R]:
    n = resolve_workers(workers)
    logger.debug("[sweep] %d jobs on %d workers", len(items), n)
    if n == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
