"""Small shared helpers."""

from __future__ import annotations

import multiprocessing
import os

WORKERS_ENV = "EPIABC_WORKERS"


def worker_count() -> int:
    """Worker-pool size, controlled by the EPIABC_WORKERS variable."""
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(1, n)


def job_map(fn, jobs):
    """Map ``fn`` over picklable jobs, in a process pool when configured.

    Results keep the order of ``jobs``, so parallel and serial runs are
    interchangeable as long as each job derives its own randomness.
    """
    jobs = list(jobs)
    workers = worker_count()
    if workers == 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with multiprocessing.Pool(workers) as pool:
        return pool.map(fn, jobs, chunksize=chunk)
