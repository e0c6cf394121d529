"""Ordered thread-pool map honouring ``GRUSHIN_LAB_THREADS``."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "GRUSHIN_LAB_THREADS"


def thread_count() -> int:
    raw = os.environ.get(ENV_VAR, "").strip()
    if raw:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}") from exc
        if n < 1:
            raise ValueError(f"{ENV_VAR} must be a positive integer, got {raw!r}")
        return n
    return os.cpu_count() or 1


def map_ordered(fn, items, threads: int | None = None) -> list:
    """``[fn(x) for x in items]``, possibly concurrent; output order is input order."""
    items = list(items)
    n = thread_count() if threads is None else int(threads)
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
