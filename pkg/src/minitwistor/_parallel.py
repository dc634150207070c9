"""Chunked evaluation of vectorised kernels over large parameter arrays."""
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 8192


def thread_count():
    try:
        n = int(os.environ.get("TWISTOR_THREADS", "0"))
    except ValueError:
        n = 0
    cpus = os.cpu_count() or 1
    return cpus if n <= 0 else min(n, cpus)


def map_chunks(func, arr, chunk=CHUNK):
    """Apply ``func`` to flat chunks of ``arr`` and reassemble in order.

    Chunks run on up to ``TWISTOR_THREADS`` threads (numpy releases the GIL
    in the heavy kernels); output order never depends on scheduling.
    """
    arr = np.asarray(arr)
    flat = arr.reshape(-1)
    if flat.size <= chunk:
        return np.asarray(func(flat)).reshape(arr.shape)
    pieces = [flat[i : i + chunk] for i in range(0, flat.size, chunk)]
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(func, pieces))
    else:
        out = [func(p) for p in pieces]
    return np.concatenate([np.asarray(o).reshape(-1) for o in out]).reshape(arr.shape)
