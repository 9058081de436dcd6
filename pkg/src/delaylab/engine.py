"""Path-parallel Monte Carlo driver with order-fixed reductions.

Paths are grouped into chunks of a fixed size that does not depend on the
worker count. Each chunk draws its own increments from the per-path Philox
streams, runs a pure kernel, and returns per-path results. Results are
concatenated in path-index order and reduced by a pairwise tree, so every
estimate is bit-identical for any number of workers.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from .errors import InvalidArgumentError
from .model.mesh import TimeMesh, standard_increments

WORKERS_ENV = "DELAYLAB_WORKERS"

Kernel = Callable[[np.ndarray], Mapping[str, np.ndarray]]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise InvalidArgumentError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        if n < 1:
            raise InvalidArgumentError(f"{WORKERS_ENV} must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def pairwise_sum(values) -> float:
    """Sum in a fixed binary tree over index order: ``((v0+v1)+(v2+v3))+...``."""
    v = np.array(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    paths: int


def mean_stderr(values) -> MCEstimate:
    v = np.asarray(values, dtype=float).ravel()
    m = v.size
    if m == 0:
        raise InvalidArgumentError("no samples")
    mean = pairwise_sum(v) / m
    if m == 1:
        return MCEstimate(mean, 0.0, 1)
    var = pairwise_sum((v - mean) ** 2) / (m - 1)
    return MCEstimate(mean, math.sqrt(var / m), m)


def chunk_for(paths: int, bytes_per_path: float, budget: float = 256e6, cap: int = 4096) -> int:
    """Fixed chunk size from a memory budget; independent of the worker count."""
    return int(max(1, min(paths, cap, budget // max(bytes_per_path, 1.0))))


def map_paths(kernel: Kernel, mesh: TimeMesh, paths: int, seed: int, *, chunk: int = 1024,
              workers: Optional[int] = None, first_path: int = 0) -> dict[str, np.ndarray]:
    """Run ``kernel`` over paths ``first_path .. first_path + paths - 1``.

    ``kernel`` receives increments of shape ``(N, m)`` for one chunk and must
    return a mapping of arrays whose leading axis has length ``m``.
    """
    if int(paths) != paths or paths < 1:
        raise InvalidArgumentError(f"path count must be a positive integer, got {paths!r}")
    paths, chunk = int(paths), int(chunk)
    starts = list(range(first_path, first_path + paths, chunk))

    def run(start):
        stop = min(start + chunk, first_path + paths)
        dB = standard_increments(mesh, seed, start, stop)
        return {k: np.asarray(v) for k, v in kernel(dB).items()}

    workers = default_workers() if workers is None else int(workers)
    if workers <= 1 or len(starts) == 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    return {k: np.concatenate([p[k] for p in parts], axis=0) for k in parts[0]}
