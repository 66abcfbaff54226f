"""Worker-pool helpers honoring the HARVEST_THREADS environment variable.

HARVEST_THREADS > 0 pins the worker count; 0 or unset means auto.  Auto
resolves to the CPU count only for workloads that release the GIL (the
compiled simulation kernel); pure-Python maps run serially since threads
cannot speed them up.  Results always merge in input order, so the worker
count never changes any output.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

from .errors import ContractError

_T = TypeVar("_T")
_R = TypeVar("_R")


def worker_count(gil_bound: bool = True) -> int:
    raw = os.environ.get("HARVEST_THREADS", "").strip()
    if raw == "":
        n = 0
    else:
        try:
            n = int(raw)
        except ValueError as exc:
            raise ContractError(f"HARVEST_THREADS={raw!r} is not an integer") from exc
        if n < 0:
            raise ContractError("HARVEST_THREADS must be >= 0")
    if n == 0:
        return 1 if gil_bound else min(8, os.cpu_count() or 1)
    return n


def map_ordered(fn: Callable[[_T], _R], items: Sequence[_T],
                gil_bound: bool = True) -> list[_R]:
    w = worker_count(gil_bound=gil_bound)
    if w == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, items))
