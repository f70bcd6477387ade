"""Ordered parallel map over independent tasks.

Tasks are pure functions of their index (all randomness is keyed by the index),
so results do not depend on scheduling. LAPACK releases the GIL, which makes a
thread pool enough for the dense linear algebra that dominates the cost.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from .errors import ConfigError

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "BLOCKCHAOS_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    return resolve_threads(raw)


def resolve_threads(value) -> int:
    try:
        n = int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"thread count must be a positive integer, got {value!r}") from None
    if n < 1:
        raise ConfigError(f"thread count must be a positive integer, got {value!r}")
    return n


def ordered_map(func: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> List[R]:
    """``[func(x) for x in items]``, evaluated on up to ``threads`` workers."""
    items = list(items)
    threads = default_threads() if threads is None else resolve_threads(threads)
    if threads == 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))
