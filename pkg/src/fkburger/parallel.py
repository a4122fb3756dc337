"""Replica-parallel driver with fixed chunking and in-order aggregation."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

DEFAULT_CHUNK = 4096


def chunks(count: int, chunk: int = DEFAULT_CHUNK) -> list:
    """(r0, size) blocks covering replicas 0..count-1; independent of the worker count."""
    return [(r0, min(chunk, count - r0)) for r0 in range(0, count, chunk)]


def _call(args):
    fn, r0, cnt, kw = args
    return fn(r0=r0, count=cnt, **kw)


def run_replicas(fn: Callable, count: int, workers: int = 1, chunk: int = DEFAULT_CHUNK,
                 **kw) -> list:
    """Evaluate ``fn(r0=..., count=..., **kw)`` on every block and return results in block order.

    ``fn`` must be a module-level function so it can be sent to worker
    processes.  Each block derives its randomness from its replica indices
    only, so the list is identical for any ``workers``.
    """
    jobs = [(fn, r0, cnt, kw) for r0, cnt in chunks(count, chunk)]
    workers = max(1, int(workers))
    if workers == 1 or len(jobs) == 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs), os.cpu_count() or 1)) as ex:
        return list(ex.map(_call, jobs))
