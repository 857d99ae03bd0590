"""Deterministic trial execution.

Each trial gets its own counter-based random stream keyed by
(master seed, trial index), so results are identical for any thread
count or scheduling order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["trial_rng", "run_trials", "default_threads"]


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trial, derived from (seed, index)."""
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DDLAB_THREADS", "1")))
    except ValueError:
        return 1


def run_trials(fn, trials: int, seed: int, threads: int | None = None) -> list:
    """Evaluate ``fn(rng, index)`` for index = 0..trials-1.

    Results are returned in index order; the output is invariant to the
    number of worker threads.
    """
    if threads is None:
        threads = default_threads()
    if threads <= 1:
        return [fn(trial_rng(seed, i), i) for i in range(trials)]
    out = [None] * trials

    def work(i):
        out[i] = fn(trial_rng(seed, i), i)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(work, range(trials)))
    return out
