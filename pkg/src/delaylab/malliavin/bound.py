"""Sobolev distances between coupled solutions and the two-term weak-error bound.

The bound evaluated here is the explicit one obtained before absorbing
constants:

    |E g(F1) - E g(F2)| <= sqrt(E|F1 - F2|^2) * sqrt(V) + sqrt(E||DF1 - DF2||^2) * sqrt(E||DF1||^-2)

    V = E||DF1||^-2 + 10 * sqrt(E[(iint |D_theta D_r F1|^2)^2]) * sqrt(E||DF1||^-8)

with ``V`` bounding the second moment of the divergence of
``DF1 / ||DF1||^2``. Every expectation is a Monte Carlo mean over coupled
paths; standard errors come from the delta method with the full sample
covariance of the per-path ingredients.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..engine import MCEstimate, chunk_for, map_paths, mean_stderr, pairwise_sum
from ..errors import InvalidArgumentError
from ..model.fields import DelaySdeProblem, TestFunction
from ..model.mesh import TimeMesh
from ..solver import check_coupled, euler_batch
from .first import along_path, grid_position, norm_sq_from_terminal, require_elliptic, \
    theta_grid, variation_batch
from .second import double_integral_sq, second_variation_grid


@dataclass(frozen=True)
class SobolevDistance:
    value: float
    stderr: float
    paths: int
    value_part: float
    derivative_part: float


def sobolev_distance_from_samples(F1, F2, DT1, DT2, spacing: float) -> SobolevDistance:
    """``||F1 - F2||_{1,2}`` from coupled samples.

    ``F*`` are terminal values ``(M,)``; ``DT*`` are ``(M, K+1)`` terminal
    derivatives ``D_theta X(t)`` on a shared grid covering ``[0, t]``.
    """
    F1, F2 = np.asarray(F1, float), np.asarray(F2, float)
    DT1, DT2 = np.asarray(DT1, float), np.asarray(DT2, float)
    if F1.shape != F2.shape or DT1.shape != DT2.shape or DT1.shape[0] != F1.shape[0]:
        raise InvalidArgumentError(
            f"grid mismatch: values {F1.shape}/{F2.shape}, fields {DT1.shape}/{DT2.shape}"
        )
    a = (F1 - F2) ** 2
    b = norm_sq_from_terminal((DT1 - DT2).T, spacing, DT1.shape[1] - 1)
    return _sobolev(a, b)


def _sobolev(a: np.ndarray, b: np.ndarray) -> SobolevDistance:
    ea, eb = mean_stderr(a), mean_stderr(b)
    total = mean_stderr(a + b)
    value = math.sqrt(max(total.value, 0.0))
    se = total.stderr / (2 * value) if value > 0 else 0.0
    return SobolevDistance(value, se, total.paths, ea.value, eb.value)


def sobolev_distance(p1: DelaySdeProblem, p2: DelaySdeProblem, t: float, paths: int,
                     K: int = 64, seed: int = 0, steps: int = 4096,
                     workers=None) -> SobolevDistance:
    check_coupled(p1, p2)
    mesh = TimeMesh(p1.T, steps)
    J = theta_grid(mesh, K)
    pos = grid_position(J, mesh, t)
    jt = int(J[pos])
    Jt = J[: pos + 1]
    spacing = J[1] * mesh.h

    def kernel(dB):
        out = {}
        for tag, p in (("1", p1), ("2", p2)):
            X = euler_batch(p, mesh, dB)
            D = variation_batch(along_path(p, mesh, X), dB, mesh.h, Jt)
            out["F" + tag], out["D" + tag] = X[jt], D[jt]
        return {"a": (out["F1"] - out["F2"]) ** 2,
                "b": norm_sq_from_terminal(out["D1"] - out["D2"], spacing, pos)}

    res = map_paths(kernel, mesh, paths, seed,
                    chunk=chunk_for(paths, 8.0 * (mesh.N + 1) * (pos + 8)), workers=workers)
    return _sobolev(res["a"], res["b"])


@dataclass(frozen=True)
class WeakBoundReport:
    lhs: float
    lhs_stderr: float
    term_A: float
    term_A_stderr: float
    term_B: float
    term_B_stderr: float
    delta_sq_bound: float
    delta_sq_bound_stderr: float
    mean_sq_diff: MCEstimate
    inv_norm_sq: MCEstimate
    inv_norm_8: MCEstimate
    dd_integral_sq: MCEstimate
    deriv_diff_sq: MCEstimate
    paths: int
    holds: bool
    margin_sigmas: float
    low_confidence: bool

    def to_dict(self) -> dict:
        return asdict(self)


_INGREDIENTS = ("sq", "inv2", "inv8", "q", "dd")


def _bound_terms(mu: np.ndarray) -> np.ndarray:
    sq, inv2, inv8, q, dd = mu
    delta = inv2 + 10.0 * math.sqrt(max(q, 0.0)) * math.sqrt(max(inv8, 0.0))
    return np.array([math.sqrt(max(sq, 0.0) * delta), math.sqrt(max(dd, 0.0) * max(inv2, 0.0)),
                     delta])


def _bound_gradient(mu: np.ndarray) -> np.ndarray:
    """Jacobian of ``(term_A, term_B, delta_sq)`` w.r.t. the five means; singular entries set to 0."""
    sq, inv2, inv8, q, dd = (max(v, 0.0) for v in mu)
    sq_q, sq_8 = math.sqrt(q), math.sqrt(inv8)
    delta = inv2 + 10.0 * sq_q * sq_8
    d_delta = np.array([0.0, 1.0,
                        5.0 * sq_q / sq_8 if sq_8 > 0 else 0.0,
                        5.0 * sq_8 / sq_q if sq_q > 0 else 0.0,
                        0.0])
    A = math.sqrt(sq * delta)
    B = math.sqrt(dd * inv2)
    gA = np.zeros(5)
    if A > 0:
        gA = 0.5 / A * (delta * np.eye(5)[0] + sq * d_delta)
    gB = np.zeros(5)
    if B > 0:
        gB[4] = 0.5 * inv2 / B
        gB[1] = 0.5 * dd / B
    return np.vstack([gA, gB, d_delta])


def assemble_report(samples: dict[str, np.ndarray]) -> WeakBoundReport:
    """Combine per-path ingredients into a :class:`WeakBoundReport`.

    ``samples`` maps ``"g"`` (``g(F1) - g(F2)``) and the five ingredient
    names ``sq, inv2, inv8, q, dd`` to arrays of per-path values.
    """
    lhs_est = mean_stderr(samples["g"])
    ests = {k: mean_stderr(samples[k]) for k in _INGREDIENTS}
    mu = np.array([ests[k].value for k in _INGREDIENTS])
    M = lhs_est.paths
    Z = np.vstack([np.asarray(samples[k], float) for k in _INGREDIENTS])
    centred = Z - mu[:, None]
    cov = np.array([[pairwise_sum(centred[i] * centred[j]) for j in range(5)] for i in range(5)])
    cov /= max(M - 1, 1) * M
    terms = _bound_terms(mu)
    J = _bound_gradient(mu)
    se = np.sqrt(np.maximum(np.einsum("ai,ij,aj->a", J, cov, J), 0.0))

    lhs = abs(lhs_est.value)
    slack = terms[0] + terms[1] - lhs
    sigma = math.sqrt(lhs_est.stderr ** 2 + se[0] ** 2 + se[1] ** 2)
    if sigma > 0:
        margin = slack / sigma
    else:
        margin = math.inf if slack >= 0 else -math.inf
    low = any(e.value > 0 and e.stderr > 0.5 * e.value for e in ests.values())
    return WeakBoundReport(
        lhs, lhs_est.stderr, float(terms[0]), float(se[0]), float(terms[1]), float(se[1]),
        float(terms[2]), float(se[2]),
        ests["sq"], ests["inv2"], ests["inv8"], ests["q"], ests["dd"], M,
        holds=bool(slack >= -2 * sigma), margin_sigmas=float(margin), low_confidence=bool(low),
    )


def weak_bound_report(p1: DelaySdeProblem, p2: DelaySdeProblem, g: TestFunction, t: float,
                      paths: int, K: int = 32, seed: int = 0, steps: int = 4096,
                      workers=None) -> WeakBoundReport:
    """Monte Carlo evaluation of both sides of the two-term weak bound at time ``t``."""
    require_elliptic(p1)
    check_coupled(p1, p2)
    if not g.in_unit_ball():
        raise InvalidArgumentError(f"test function bound {g.bound} exceeds 1")
    mesh = TimeMesh(p1.T, steps)
    J = theta_grid(mesh, K)
    pos = grid_position(J, mesh, t)
    if pos == 0:
        raise InvalidArgumentError("t must be positive")
    jt = int(J[pos])
    Jt = J[: pos + 1]
    spacing = J[1] * mesh.h

    def kernel(dB):
        X1 = euler_batch(p1, mesh, dB)
        pc1 = along_path(p1, mesh, X1, second=True)
        D1 = variation_batch(pc1, dB, mesh.h, Jt)
        X2 = euler_batch(p2, mesh, dB)
        D2 = variation_batch(along_path(p2, mesh, X2), dB, mesh.h, Jt)
        G = second_variation_grid(pc1, D1, dB, mesh.h, Jt, jt)
        n1 = norm_sq_from_terminal(D1[jt], spacing, pos)
        iint = double_integral_sq(G, spacing, pos)
        return {
            "g": g(X1[jt]) - g(X2[jt]),
            "sq": (X1[jt] - X2[jt]) ** 2,
            "inv2": 1.0 / n1,
            "inv8": n1 ** -4,
            "q": iint ** 2,
            "dd": norm_sq_from_terminal(D1[jt] - D2[jt], spacing, pos),
        }

    per_path = 8.0 * (mesh.N + 1) * (6 * (pos + 1) + 24)
    res = map_paths(kernel, mesh, paths, seed, chunk=chunk_for(paths, per_path, budget=400e6),
                    workers=workers)
    return assemble_report(res)
