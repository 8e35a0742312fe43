"""Order-preserving map over independent paths."""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


def max_threads() -> int:
    return os.cpu_count() or 1


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        return 1
    threads = int(threads)
    if threads < 1:
        raise ConfigurationError("--threads must be >= 1")
    if threads > max_threads():
        logger.warning("--threads %d capped at %d logical cores", threads, max_threads())
        return max_threads()
    return threads


def make_mapper(threads: int = 1):
    """``mapper(fn, items)`` returning results in input order.

    Every path draws from its own counter-based streams, so the results do not
    depend on the number of workers.
    """
    if threads <= 1:
        return lambda fn, items: list(map(fn, items))

    def mapper(fn, items):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))

    return mapper
