"""Uniform time meshes and Brownian paths sampled on them."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import AlignmentError, InvalidArgumentError

ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class TimeMesh:
    """Uniform grid ``t_i = i*T/N`` on ``[0, T]``."""

    T: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise InvalidArgumentError(f"horizon T must be positive, got {self.T!r}")
        if int(self.N) != self.N or self.N < 1:
            raise InvalidArgumentError(f"step count N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    def steps_for(self, duration: float, what: str = "duration") -> int:
        """Number of mesh steps spanning ``duration``; raises if off-mesh."""
        ratio = duration / self.h
        k = int(round(ratio))
        if abs(ratio - k) > ALIGN_TOL:
            raise AlignmentError(
                f"{what}={duration!r} is not an integer multiple of the step h={self.h!r} "
                f"(ratio {ratio!r}); refine the mesh"
            )
        return k

    def index_of(self, t: float, what: str = "t") -> int:
        if t < -ALIGN_TOL * self.h or t > self.T * (1 + ALIGN_TOL):
            raise InvalidArgumentError(f"{what}={t!r} lies outside [0, {self.T}]")
        return self.steps_for(t, what)

    def refine(self, factor: int) -> "TimeMesh":
        return TimeMesh(self.T, self.N * factor)


def build_mesh(T: float, N: int) -> TimeMesh:
    return TimeMesh(T, N)


def path_generator(seed: int, path_index: int = 0) -> np.random.Generator:
    """Independent Philox stream keyed by ``(seed, path_index)``.

    Both words go into the 128-bit Philox key, so each Monte Carlo path owns
    a stream that does not depend on which worker draws it or in what order.
    """
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(path_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def standard_increments(mesh: TimeMesh, seed: int, start: int, stop: int) -> np.ndarray:
    """Brownian increments for paths ``start..stop-1`` as an ``(N, stop-start)`` array."""
    out = np.empty((stop - start, mesh.N))
    for row, m in enumerate(range(start, stop)):
        path_generator(seed, m).standard_normal(out=out[row])
    out *= np.sqrt(mesh.h)
    return np.ascontiguousarray(out.T)


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Increments of one Brownian path on ``mesh``.

    ``values`` holds ``B(t_i)`` with ``B(0) = 0``. For a freshly sampled path
    it is the running sum of the increments; a coarsened path subsamples the
    parent's ``values`` so shared nodes agree bit-for-bit.
    """

    mesh: TimeMesh
    increments: np.ndarray
    seed: int = 0
    path_index: int = 0
    values: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.shape != (self.mesh.N,):
            raise InvalidArgumentError(
                f"expected {self.mesh.N} increments, got shape {inc.shape}"
            )
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        vals = self.values
        if vals is None:
            vals = np.concatenate(([0.0], np.cumsum(inc)))
        vals = np.asarray(vals, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


def sample_brownian(mesh: TimeMesh, seed: int, path_index: int = 0) -> BrownianPath:
    inc = standard_increments(mesh, seed, path_index, path_index + 1)[:, 0]
    return BrownianPath(mesh, inc, seed=seed, path_index=path_index)


def coarsen_path(path: BrownianPath, factor: int) -> BrownianPath:
    """Same Brownian path observed on every ``factor``-th node."""
    if int(factor) != factor or factor < 1 or path.mesh.N % factor:
        raise InvalidArgumentError(
            f"factor {factor!r} does not divide the step count {path.mesh.N}"
        )
    factor = int(factor)
    if factor == 1:
        return path
    values = path.values[::factor].copy()
    return BrownianPath(
        TimeMesh(path.mesh.T, path.mesh.N // factor),
        np.diff(values),
        seed=path.seed,
        path_index=path.path_index,
        values=values,
    )
