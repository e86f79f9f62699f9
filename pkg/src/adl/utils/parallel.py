"""スレッド並列のユーティリティ。

結果は常に投入順で返すので、集約結果はスレッド数に依存しない。
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from adl.utils.logging_utils import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "ADL_THREADS"


def worker_count(requested: Optional[int] = None) -> int:
    """ワーカー数。明示指定 > 環境変数 ADL_THREADS > CPU 数。"""
    if requested is not None and requested > 0:
        return int(requested)
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            n = int(raw)
            if n > 0:
                return n
        except ValueError:
            logger.warning("Ignoring non-integer %s=%r", THREADS_ENV, raw)
    return os.cpu_count() or 1


def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """fn を items に適用し、入力順のリストで返す。"""
    items = list(items)
    n = min(worker_count(workers), max(len(items), 1))
    if n <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
