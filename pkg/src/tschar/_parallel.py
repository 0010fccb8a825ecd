"""Order-preserving parallel map capped by the TSKIT_THREADS variable."""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("TSKIT_THREADS", "1").strip() or "1"
    n = int(raw)
    if n < 0:
        raise ValueError("TSKIT_THREADS must be >= 0")
    if n == 0:
        n = os.cpu_count() or 1
    return n


def pmap(fn, items):
    """``list(map(fn, items))``, possibly evaluated on a thread pool.

    Results are returned in input order, so callers see the same output
    regardless of scheduling.
    """
    items = list(items)
    n = min(thread_count(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
