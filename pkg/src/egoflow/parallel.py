"""Fork-based worker pool over per-ego tasks.

The graph is published as a module global before the pool forks, so workers
inherit it copy-on-write instead of pickling it. Results are returned per
chunk and reassembled in submission order, making output independent of
worker count and scheduling.
"""

from __future__ import annotations

import multiprocessing
import os

import numpy as np

_WORK_GRAPH = None
_WORK_FN = None
_WORK_KWARGS = None


def default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return multiprocessing.cpu_count()


def _run_chunk(chunk):
    return _WORK_FN(_WORK_GRAPH, chunk, **_WORK_KWARGS)


def map_ego_chunks(g, fn, ego_indices, workers: int = 1, n_chunks: int | None = None,
                   **kwargs):
    """Apply ``fn(g, ego_index_array, **kwargs)`` over chunks of egos.

    Returns the list of per-chunk results in chunk order. ``fn`` must be a
    module-level function (workers import it by reference through the fork).
    """
    ego_indices = np.asarray(ego_indices, dtype=np.int64)
    workers = max(1, int(workers))
    if workers == 1 or len(ego_indices) < 2:
        return [fn(g, ego_indices, **kwargs)]
    global _WORK_GRAPH, _WORK_FN, _WORK_KWARGS
    if n_chunks is None:
        n_chunks = workers * 8
    chunks = np.array_split(ego_indices, min(n_chunks, len(ego_indices)))
    _WORK_GRAPH, _WORK_FN, _WORK_KWARGS = g, fn, kwargs
    try:
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=workers) as pool:
            return pool.map(_run_chunk, chunks)
    finally:
        _WORK_GRAPH = _WORK_FN = _WORK_KWARGS = None
