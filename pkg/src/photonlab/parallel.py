"""Worker-count control for data-parallel evaluation.

``PHOTONLAB_THREADS`` caps both the BLAS pools and the thread pool used for
outcome-parallel loops. Results are gathered in input order, so the reduction
order (and therefore every output bit) does not depend on the worker count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

from threadpoolctl import threadpool_limits


def worker_count():
    raw = os.environ.get("PHOTONLAB_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, os.cpu_count() or 1)


@contextmanager
def blas_limit():
    raw = os.environ.get("PHOTONLAB_THREADS", "").strip()
    if raw:
        with threadpool_limits(limits=worker_count()):
            yield
    else:
        yield


def map_ordered(fn, items, min_chunk=16):
    items = list(items)
    n = worker_count()
    if n == 1 or len(items) < 2 * min_chunk:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
