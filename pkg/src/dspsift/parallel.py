"""Order-preserving worker pool: concurrency never changes output bytes."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def pmap(fn, items, jobs: int = 1) -> list:
    """Map fn over items, in-process when jobs <= 1, else across processes.

    Results come back in input order, so a merge downstream is deterministic
    regardless of the worker count.
    """
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
