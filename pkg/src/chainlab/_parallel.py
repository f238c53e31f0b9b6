"""Thread fan-out for independent trials, capped by ``CHAINLAB_THREADS``."""

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    try:
        return max(1, int(os.environ.get("CHAINLAB_THREADS", "1")))
    except ValueError:
        return 1


def map_ordered(fn, items):
    """``list(map(fn, items))``, possibly threaded; results keep input order."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
