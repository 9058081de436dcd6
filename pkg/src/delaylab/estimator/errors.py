"""Strong and weak error estimators and log-log rate fits."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import linregress

from ..engine import chunk_for, map_paths, mean_stderr
from ..errors import InvalidArgumentError
from ..model.fields import DelaySdeProblem, TestFunction
from ..model.mesh import TimeMesh
from ..solver import check_coupled, euler_batch

KINDS = ("strong-L2", "strong-sup-L2", "weak")


@dataclass(frozen=True)
class ErrorEstimate:
    value: float
    stderr: float
    paths: int
    kind: str
    level: object = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgumentError(f"unknown error kind {self.kind!r}")
        if self.stderr < 0:
            raise InvalidArgumentError("stderr must be nonnegative")

    @property
    def censored(self) -> bool:
        """Indistinguishable from zero: excluded from rate fits."""
        return not (self.value > 0) or self.value < 2.0 * self.stderr


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    levels: tuple


def fit_rate(levels: Sequence[float], errors: Sequence[float]) -> RateFit:
    """Least-squares line through ``(log level, log error)``; the slope is the empirical rate."""
    levels = np.asarray(levels, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if levels.shape != errors.shape or levels.size < 3:
        raise InvalidArgumentError("need at least three (level, error) pairs of equal length")
    if np.any(levels <= 0):
        raise InvalidArgumentError("levels must be positive")
    if np.any(~(errors > 0)):
        raise InvalidArgumentError(
            f"errors must be positive; drop noise-floor levels first (got {errors.tolist()})"
        )
    res = linregress(np.log(levels), np.log(errors))
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue ** 2),
                   tuple(levels.tolist()))


def _mesh(p: DelaySdeProblem, steps: int) -> TimeMesh:
    return TimeMesh(p.T, steps)


def strong_error(p1: DelaySdeProblem, p2: DelaySdeProblem, paths: int, seed: int = 0,
                 steps: int = 4096, t: Optional[float] = None, sup: bool = False,
                 workers=None, level=None) -> ErrorEstimate:
    """Mean of ``|X1(t) - X2(t)|^2`` (or of its max over mesh nodes) over coupled paths."""
    check_coupled(p1, p2)
    mesh = _mesh(p1, steps)
    jt = mesh.N if t is None else mesh.index_of(t)

    def kernel(dB):
        d = euler_batch(p1, mesh, dB) - euler_batch(p2, mesh, dB)
        sq = d ** 2
        return {"v": sq.max(axis=0) if sup else sq[jt]}

    res = map_paths(kernel, mesh, paths, seed, chunk=chunk_for(paths, 24.0 * (mesh.N + 1)),
                    workers=workers)
    est = mean_stderr(res["v"])
    return ErrorEstimate(est.value, est.stderr, est.paths,
                         "strong-sup-L2" if sup else "strong-L2", level)


def weak_error(p1: DelaySdeProblem, p2: DelaySdeProblem, g: TestFunction, paths: int,
               seed: int = 0, steps: int = 4096, t: Optional[float] = None,
               coupled: bool = True, workers=None, level=None) -> ErrorEstimate:
    """``|E g(X1(t)) - E g(X2(t))|``.

    Coupled: the difference is averaged pathwise on shared increments.
    Uncoupled: the second problem uses the next ``paths`` path streams, and
    the standard error combines two independent means.
    """
    check_coupled(p1, p2)
    mesh = _mesh(p1, steps)
    jt = mesh.N if t is None else mesh.index_of(t)
    chunk = chunk_for(paths, 16.0 * (mesh.N + 1))

    if coupled:
        def kernel(dB):
            return {"v": g(euler_batch(p1, mesh, dB)[jt]) - g(euler_batch(p2, mesh, dB)[jt])}

        est = mean_stderr(map_paths(kernel, mesh, paths, seed, chunk=chunk, workers=workers)["v"])
        return ErrorEstimate(abs(est.value), est.stderr, est.paths, "weak", level)

    def single(p):
        def kernel(dB):
            return {"v": g(euler_batch(p, mesh, dB)[jt])}
        return kernel

    e1 = mean_stderr(map_paths(single(p1), mesh, paths, seed, chunk=chunk, workers=workers)["v"])
    e2 = mean_stderr(map_paths(single(p2), mesh, paths, seed, chunk=chunk, workers=workers,
                               first_path=paths)["v"])
    return ErrorEstimate(abs(e1.value - e2.value), math.hypot(e1.stderr, e2.stderr), paths,
                         "weak", level)
