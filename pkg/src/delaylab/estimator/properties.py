"""Monte Carlo boundedness checks for solutions and their variations.

Every measure is evaluated on a mesh with ``N`` steps and on its refinement
with ``2N`` steps driven by the same Brownian paths (the coarse increments
are pairwise sums of the fine ones), so a change of more than a factor two
signals a mesh-dependent quantity rather than Monte Carlo noise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..engine import MCEstimate, chunk_for, map_paths, mean_stderr
from ..errors import InvalidArgumentError
from ..malliavin.first import along_path, theta_grid, variation_batch
from ..malliavin.second import second_variation_grid
from ..model.fields import DelaySdeProblem
from ..model.mesh import TimeMesh
from ..solver import euler_batch

DEFAULT_GAPS = (2.0**-2, 2.0**-3, 2.0**-4, 2.0**-5, 2.0**-6)


@dataclass(frozen=True)
class PropertyCheck:
    name: str
    coarse: float
    fine: float
    steps: int

    @property
    def ratio(self) -> float:
        lo, hi = sorted((abs(self.coarse), abs(self.fine)))
        return np.inf if lo == 0 and hi > 0 else (1.0 if hi == 0 else hi / lo)

    def stable(self, factor: float = 2.0) -> bool:
        return bool(np.isfinite(self.coarse) and np.isfinite(self.fine) and self.ratio <= factor)


def _pair_sum(dB: np.ndarray) -> np.ndarray:
    return dB.reshape((dB.shape[0] // 2, 2) + dB.shape[1:]).sum(axis=1)


def _doubled(name: str, measure: Callable, problem: DelaySdeProblem, steps: int, paths: int,
             seed: int, bytes_per_path: float, workers) -> PropertyCheck:
    fine = TimeMesh(problem.T, 2 * steps)
    coarse = TimeMesh(problem.T, steps)

    def kernel(dB):
        a = measure(coarse, _pair_sum(dB))
        b = measure(fine, dB)
        out = {f"c{k}": v for k, v in enumerate(a)}
        out.update({f"f{k}": v for k, v in enumerate(b)})
        return out

    res = map_paths(kernel, fine, paths, seed, chunk=chunk_for(paths, bytes_per_path, budget=128e6),
                    workers=workers)
    n = sum(1 for k in res if k.startswith("c"))
    mc = [mean_stderr(res[f"c{k}"]).value for k in range(n)]
    mf = [mean_stderr(res[f"f{k}"]).value for k in range(n)]
    return PropertyCheck(name, max(mc), max(mf), steps)


def _gap_pairs(mesh: TimeMesh, gaps: Sequence[float], t: float) -> list[tuple[int, int, float]]:
    jt = mesh.index_of(t, "t")
    out = []
    for g in gaps:
        k = mesh.steps_for(g, "gap")
        if k == 0 or k > jt:
            raise InvalidArgumentError(f"gap={g} must lie in (0, t]")
        out.append((jt - k, jt, g))
    return out


def second_moment_check(problem: DelaySdeProblem, paths: int = 2000, steps: int = 1024,
                        seed: int = 0, nodes: int = 16, workers=None) -> PropertyCheck:
    """``max_t E|X(t)|^2`` over ``nodes + 1`` equispaced times."""
    def measure(mesh, dB):
        X = euler_batch(problem, mesh, dB)
        return [X[j] ** 2 for j in theta_grid(mesh, nodes)]

    return _doubled("E|X(t)|^2", measure, problem, steps, paths, seed, 32.0 * (2 * steps + 1),
                    workers)


def holder_check(problem: DelaySdeProblem, paths: int = 2000, steps: int = 1024, seed: int = 0,
                 gaps: Sequence[float] = DEFAULT_GAPS, t: float = None,
                 workers=None) -> PropertyCheck:
    """``max_gap E|X(t) - X(t - gap)|^2 / gap`` at ``t`` (default ``T``)."""
    t = problem.T if t is None else t

    def measure(mesh, dB):
        X = euler_batch(problem, mesh, dB)
        return [(X[j1] - X[j0]) ** 2 / g for j0, j1, g in _gap_pairs(mesh, gaps, t)]

    return _doubled("E|X(t)-X(s)|^2/|t-s|", measure, problem, steps, paths, seed,
                    32.0 * (2 * steps + 1), workers)


def derivative_moment_check(problem: DelaySdeProblem, paths: int = 500, steps: int = 1024,
                            seed: int = 0, K: int = 16, workers=None) -> PropertyCheck:
    """``max_{theta <= t} E|D_theta X(t)|^2`` over the ``(K+1) x (K+1)`` grid."""
    def measure(mesh, dB):
        X = euler_batch(problem, mesh, dB)
        J = theta_grid(mesh, K)
        D = variation_batch(along_path(problem, mesh, X), dB, mesh.h, J)
        return [D[jt, k] ** 2 for a, jt in enumerate(J) for k in range(a + 1)]

    return _doubled("E|D_theta X(t)|^2", measure, problem, steps, paths, seed,
                    8.0 * (2 * steps + 1) * (K + 12), workers)


def derivative_holder_check(problem: DelaySdeProblem, paths: int = 1000, steps: int = 1024,
                            seed: int = 0, theta: float = 0.0,
                            gaps: Sequence[float] = DEFAULT_GAPS, t: float = None,
                            workers=None) -> PropertyCheck:
    """``max_gap E|D_theta X(t) - D_theta X(t - gap)|^2 / gap`` at fixed ``theta``."""
    t = problem.T if t is None else t

    def measure(mesh, dB):
        X = euler_batch(problem, mesh, dB)
        j = mesh.index_of(theta, "theta")
        D = variation_batch(along_path(problem, mesh, X), dB, mesh.h, [j])[:, 0]
        pairs = _gap_pairs(mesh, gaps, t)
        if any(j0 < j for j0, _, _ in pairs):
            raise InvalidArgumentError("every t - gap must be at least theta")
        return [(D[j1] - D[j0]) ** 2 / g for j0, j1, g in pairs]

    return _doubled("E|D X(t)-D X(s)|^2/|t-s|", measure, problem, steps, paths, seed,
                    8.0 * (2 * steps + 1) * 14, workers)


def second_variation_check(problem: DelaySdeProblem, paths: int = 500, steps: int = 1024,
                           seed: int = 0, K: int = 16, t: float = None,
                           workers=None) -> PropertyCheck:
    """``max_{r, theta} E|D_r D_theta X(t)|^4`` over the ``(K+1)^2`` grid at ``t`` (default ``T``)."""
    t = problem.T if t is None else t

    def measure(mesh, dB):
        X = euler_batch(problem, mesh, dB)
        J = theta_grid(mesh, K)
        jt = mesh.index_of(t, "t")
        J = J[J <= jt]
        pc = along_path(problem, mesh, X, second=True)
        D = variation_batch(pc, dB, mesh.h, J)
        G = second_variation_grid(pc, D, dB, mesh.h, J, jt) ** 4
        n = J.size
        return [G[:, a, b] for a in range(n) for b in range(n)]

    return _doubled("E|D_r D_theta X(t)|^4", measure, problem, steps, paths, seed,
                    8.0 * (2 * steps + 1) * (2 * K + 24), workers)


def run_property_suite(problem: DelaySdeProblem, steps: int = 1024, seed: int = 0,
                       workers=None) -> list[PropertyCheck]:
    return [
        second_moment_check(problem, steps=steps, seed=seed, workers=workers),
        holder_check(problem, steps=steps, seed=seed, workers=workers),
        derivative_moment_check(problem, steps=steps, seed=seed, workers=workers),
        derivative_holder_check(problem, steps=steps, seed=seed, workers=workers),
        second_variation_check(problem, steps=steps, seed=seed, workers=workers),
    ]
