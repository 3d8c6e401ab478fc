"""Thread-pool map honoring the MA_LAB_THREADS cap.

Results are gathered by input index, so the output is bitwise identical to a
serial run regardless of scheduling.  With MA_LAB_THREADS unset or set to 1
(the default) everything runs inline.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

_T = TypeVar("_T")
_R = TypeVar("_R")

__all__ = ["thread_count", "ordered_map"]


def thread_count() -> int:
    raw = os.environ.get("MA_LAB_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def ordered_map(fn: Callable[[_T], _R], items: Iterable[_T]) -> list[_R]:
    seq: Sequence[_T] = list(items)
    n = thread_count()
    if n <= 1 or len(seq) <= 1:
        return [fn(x) for x in seq]
    with ThreadPoolExecutor(max_workers=min(n, len(seq))) as pool:
        return list(pool.map(fn, seq))
