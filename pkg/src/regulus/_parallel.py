"""Deterministic chunked thread map used by the pair sweeps."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence


def chunk_bounds(n: int, chunks: int) -> list:
    """Split ``range(n)`` into at most ``chunks`` contiguous ``(lo, hi)`` blocks."""
    chunks = max(1, min(chunks, n)) if n else 1
    step, extra = divmod(n, chunks)
    out, lo = [], 0
    for c in range(chunks):
        hi = lo + step + (1 if c < extra else 0)
        out.append((lo, hi))
        lo = hi
    return out


def map_chunks(fn: Callable, n: int, threads: int = 1) -> list:
    """Apply ``fn(lo, hi)`` over contiguous blocks and return results in block order.

    The block layout depends only on ``n`` (never on ``threads``) so results
    are identical for every thread count.
    """
    bounds = chunk_bounds(n, max(1, (n + 4095) // 4096))
    if threads <= 1 or len(bounds) == 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))
