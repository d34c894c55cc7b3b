"""Worker-count control shared by all modules.

The count comes from :func:`set_threads` (the CLI ``--threads`` flag),
else the ``FOLDYLAX_THREADS`` environment variable, else 1.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_threads: Optional[int] = None


def set_threads(n: Optional[int]) -> None:
    global _threads
    if n is not None and int(n) < 1:
        raise ValueError("thread count must be at least 1")
    _threads = None if n is None else int(n)


def worker_count() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get("FOLDYLAX_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"FOLDYLAX_THREADS={env!r} is not an integer")
    return 1


def pmap(fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Order-preserving map, threaded when more than one worker is allowed."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
