"""Chunked thread pool execution with a reduction order independent of the worker count."""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterator, Sequence, TypeVar

__all__: tuple[str, ...] = ("chunk_ranges", "run_chunks")

_T = TypeVar("_T")


def chunk_ranges(total: int, chunk_size: int) -> Iterator[tuple[int, int]]:
    """
    Splits [0, total) into consecutive [start, stop) ranges.

    :param total: Number of items.
    :param chunk_size: Items per chunk.
    :return: Iterator of (start, stop) pairs.
    """
    for start in range(0, total, max(1, chunk_size)):
        yield start, min(total, start + max(1, chunk_size))


def run_chunks(func: Callable[[int, int], _T], total: int, chunk_size: int, threads: int = 1) -> list[_T]:
    """
    Runs func on every chunk and returns the results in chunk order.

    Chunks are fixed by chunk_size, so any reduction over the result list in order gives
    the same floating point result for every worker count.

    :param func: Callable taking (start, stop).
    :param total: Number of items.
    :param chunk_size: Items per chunk.
    :param threads: Worker count, 1 runs in the calling thread.
    :return: Results in chunk order.
    """
    ranges: Sequence[tuple[int, int]] = list(chunk_ranges(total=total, chunk_size=chunk_size))
    if threads <= 1 or len(ranges) <= 1:
        return [func(start, stop) for start, stop in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: func(r[0], r[1]), ranges))
