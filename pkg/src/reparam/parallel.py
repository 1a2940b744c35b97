"""Thread-pool helper honoring the REPARAM_THREADS cap."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count() -> int:
    raw = os.environ.get("REPARAM_THREADS", "")
    if raw.strip():
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"REPARAM_THREADS must be an integer, got {raw!r}")
        return max(1, n)
    return max(1, os.cpu_count() or 1)


def pmap(fn, items):
    """Map fn over items, threading only when it can possibly help."""
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as ex:
        return list(ex.map(fn, items))
