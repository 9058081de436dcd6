"""Rate experiments: Carathéodory lag and delay continuity.

Each experiment runs every level on the same fine-mesh paths in one pass,
so level-to-level differences are not blurred by independent noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..engine import chunk_for, map_paths, mean_stderr
from ..errors import AlignmentError, InvalidArgumentError
from ..malliavin.first import require_elliptic
from ..model.fields import DelaySdeProblem, TestFunction
from ..model.mesh import TimeMesh
from ..solver import build_caratheodory_problem, check_coupled, euler_batch
from .errors import ErrorEstimate, RateFit, fit_rate


@dataclass
class ExperimentResult:
    kind: str
    rows: list[ErrorEstimate]
    fit: Optional[RateFit]
    meta: dict = field(default_factory=dict)

    @property
    def levels(self) -> list:
        return [r.level for r in self.rows]

    @property
    def errors(self) -> list[float]:
        return [r.value for r in self.rows]

    def uncensored(self) -> list[ErrorEstimate]:
        return [r for r in self.rows if not r.censored]


def fit_uncensored(rows: Sequence[ErrorEstimate]) -> Optional[RateFit]:
    keep = [r for r in rows if not r.censored]
    if len(keep) < 3:
        return None
    return fit_rate([float(r.level) for r in keep], [r.value for r in keep])


def _check_levels(mesh: TimeMesh, lags: dict, what: str) -> None:
    bad = []
    for level, lag in lags.items():
        try:
            mesh.steps_for(lag)
        except AlignmentError:
            bad.append(level)
    if bad:
        raise AlignmentError(
            f"{what} not aligned with the fine mesh (N={mesh.N}, T={mesh.T}): "
            + ", ".join(f"{what.split()[0]}={b}" for b in bad)
        )


def _rows_from_samples(samples: dict, levels, strong: bool, paths: int) -> list[ErrorEstimate]:
    rows = []
    for k, level in enumerate(levels):
        est = mean_stderr(samples[f"L{k}"])
        if strong:
            rms = math.sqrt(max(est.value, 0.0))
            se = est.stderr / (2 * rms) if rms > 0 else 0.0
            rows.append(ErrorEstimate(rms, se, paths, "strong-sup-L2", level))
        else:
            rows.append(ErrorEstimate(abs(est.value), est.stderr, paths, "weak", level))
    return rows


def caratheodory_rate_experiment(base: DelaySdeProblem, levels: Sequence[int], paths: int,
                                 steps: int = 4096, seed: int = 0,
                                 g: Optional[TestFunction] = None,
                                 workers=None) -> ExperimentResult:
    """Carathéodory scheme ``x^n`` against the un-lagged solution ``x`` for each ``n``.

    Strong (``g is None``): RMS of ``max_i |x^n(t_i) - x(t_i)|``.
    Weak: ``|E g(x^n(T)) - E g(x(T))|`` estimated on coupled differences.
    """
    mesh = TimeMesh(base.T, steps)
    levels = [int(n) for n in levels]
    _check_levels(mesh, {n: 1.0 / n for n in levels}, "n (lag 1/n)")
    if g is not None:
        require_elliptic(base)
    schemes = [build_caratheodory_problem(base, n) for n in levels]
    strong = g is None

    def kernel(dB):
        X = euler_batch(base, mesh, dB)
        out = {}
        for k, p in enumerate(schemes):
            Xn = euler_batch(p, mesh, dB)
            if strong:
                out[f"L{k}"] = ((Xn - X) ** 2).max(axis=0)
            else:
                out[f"L{k}"] = g(Xn[-1]) - g(X[-1])
        return out

    res = map_paths(kernel, mesh, paths, seed, chunk=chunk_for(paths, 32.0 * (mesh.N + 1)),
                    workers=workers)
    rows = _rows_from_samples(res, levels, strong, paths)
    meta = {"mode": "strong" if strong else "weak", "expected_slope": -0.5,
            "base": base.name, "fine_steps": steps, "seed": seed}
    return ExperimentResult("strong_rate" if strong else "weak_rate", rows,
                            fit_uncensored(rows), meta)


def delay_continuity_experiment(problem: DelaySdeProblem, gaps: Sequence[float], paths: int,
                                g: TestFunction, steps: int = 4096, seed: int = 0,
                                workers=None) -> ExperimentResult:
    """Weak error between delays ``tau1 = problem.tau`` and ``tau1 + gap`` at ``T``."""
    require_elliptic(problem)
    mesh = TimeMesh(problem.T, steps)
    gaps = [float(x) for x in gaps]
    if any(x < 0 for x in gaps):
        raise InvalidArgumentError("gaps must be nonnegative")
    _check_levels(mesh, {x: problem.tau + x for x in gaps}, "gap (tau1 + gap)")
    if problem.tau:
        mesh.steps_for(problem.tau, "tau")
    others = [problem.with_tau(problem.tau + x) for x in gaps]
    for q in others:
        check_coupled(problem, q)

    def kernel(dB):
        g1 = g(euler_batch(problem, mesh, dB)[-1])
        out = {}
        for k, (x, q) in enumerate(zip(gaps, others)):
            out[f"L{k}"] = np.zeros_like(g1) if x == 0 else g1 - g(euler_batch(q, mesh, dB)[-1])
        return out

    res = map_paths(kernel, mesh, paths, seed, chunk=chunk_for(paths, 24.0 * (mesh.N + 1)),
                    workers=workers)
    rows = _rows_from_samples(res, gaps, False, paths)
    beta = problem.phi.beta if problem.phi.kind == "holder" else 1.0
    meta = {"tau1": problem.tau, "beta": beta, "expected_slope": min(beta, 0.5),
            "fine_steps": steps, "seed": seed}
    return ExperimentResult("delay_continuity", rows, fit_uncensored(rows), meta)
