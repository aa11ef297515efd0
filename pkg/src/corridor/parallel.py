"""Thread-pool helper for data-parallel batch operations.

Batch work (collision checks, sampling walks, roadmap sweeps, benchmark
instances) is split into index chunks whose results are merged back in
index order, so the outcome never depends on the number of workers.
``CORRIDOR_THREADS`` caps the pool size; nested parallel regions run
serially to avoid pool starvation.
"""

from __future__ import annotations

import os
import threading
from concurrent.futures import ThreadPoolExecutor

_local = threading.local()
_pool_lock = threading.Lock()
_pool: ThreadPoolExecutor | None = None
_pool_size = 0


_CPUS = max(1, os.cpu_count() or 1)


def worker_count() -> int:
    env = os.environ.get("CORRIDOR_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return _CPUS


def _get_pool(n: int) -> ThreadPoolExecutor:
    global _pool, _pool_size
    with _pool_lock:
        if _pool is None or _pool_size != n:
            if _pool is not None:
                _pool.shutdown(wait=False)
            _pool = ThreadPoolExecutor(max_workers=n, thread_name_prefix="corridor")
            _pool_size = n
        return _pool


def map_chunks(fn, n_items: int, min_chunk: int = 16384):
    """Run ``fn(lo, hi)`` over a partition of range(n_items); return results in order.

    Falls back to a single inline call when the batch is small enough that
    pool overhead would dominate, when only one worker is configured, or
    when we are already inside a parallel region.
    """
    if n_items <= 0:
        return []
    workers = worker_count()
    nested = getattr(_local, "busy", False)
    n_chunks = min(workers, max(1, n_items // min_chunk))
    if workers == 1 or nested or n_chunks < 2:
        return [fn(0, n_items)]
    bounds = [(i * n_items) // n_chunks for i in range(n_chunks + 1)]
    pool = _get_pool(workers)

    def run(lo, hi):
        _local.busy = True
        try:
            return fn(lo, hi)
        finally:
            _local.busy = False

    futures = [pool.submit(run, bounds[i], bounds[i + 1]) for i in range(n_chunks)]
    return [f.result() for f in futures]
