"""Deterministic chunked execution.

Work is always split into fixed-size chunks whose partial results are
combined in chunk order, so the numbers cannot depend on how many workers
run them.  ``GRIDRISK_THREADS`` caps the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

CHUNK_SIZE = 4096


def worker_count() -> int:
    raw = os.environ.get("GRIDRISK_THREADS")
    if raw is not None:
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return min(4, os.cpu_count() or 1)


def chunk_ranges(n_items: int, chunk_size: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(start, min(start + chunk_size, n_items)) for start in range(0, n_items, chunk_size)]


def run_chunks(
    fn: Callable[[int, int], T], n_items: int, chunk_size: int = CHUNK_SIZE
) -> Sequence[T]:
    """Evaluate ``fn(start, stop)`` over fixed chunks; results in chunk order."""
    ranges = chunk_ranges(n_items, chunk_size)
    if not ranges:
        return []
    workers = min(worker_count(), len(ranges))
    if workers <= 1:
        return [fn(start, stop) for start, stop in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda span: fn(*span), ranges))
