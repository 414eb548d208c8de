from __future__ import annotations

import os
from typing import Any, Callable, Iterable, Optional

from joblib import Parallel, delayed


def thread_count(default: int = 1) -> int:
    raw = os.getenv("OZONECAST_THREADS", "").strip()
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def parallel_map(fn: Callable[..., Any], items: Iterable[Any], n_jobs: Optional[int] = None) -> list[Any]:
    """Map fn over items; results come back in input order whatever the worker count."""
    items = list(items)
    n_jobs = thread_count() if n_jobs is None else max(1, int(n_jobs))
    if n_jobs == 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return Parallel(n_jobs=min(n_jobs, len(items)), prefer="threads")(delayed(fn)(item) for item in items)
