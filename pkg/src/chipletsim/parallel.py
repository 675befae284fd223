"""Order-preserving fan-out over fixed work chunks.

Chunk boundaries never depend on the worker count, and every chunk draws
from counter-based streams, so results are identical for any ``workers``.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")

CHUNK_TRIALS = 2048


def trial_chunks(start: int, stop: int, size: int = CHUNK_TRIALS) -> list[tuple[int, int]]:
    return [(s, min(s + size, stop)) for s in range(start, stop, size)]


def run_chunks(fn: Callable[..., T], jobs: Iterable[tuple], workers: int = 1) -> list[T]:
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        futures = [pool.submit(fn, *j) for j in jobs]
        return [f.result() for f in futures]
