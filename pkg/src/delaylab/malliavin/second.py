"""Second Malliavin derivative ``D_r D_theta X(t)`` of the Euler delay scheme.

Two routes compute the same discrete object:

* :func:`second_variation_forward` integrates the linear equation for one
  ``(r, theta)`` pair forward from ``max(r, theta)``, with every term written
  out (initial jump, the four forcing terms built from the chain rule applied
  to ``b_x, b_y, sigma_x, sigma_y``, and the four homogeneous terms).
* :func:`second_variation_grid` gets the whole ``(r, theta)`` grid at a
  fixed ``t`` from one backward sweep of the adjoint recursion per path and
  two batched matrix products, using the discrete variation-of-constants
  identity ``Y(t) = lam(j0) Y(j0) + sum_i lam(i+1) f_i``.

The forward route is the reference; the grid route is what Monte Carlo
experiments use.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgumentError
from ..model.fields import DelaySdeProblem
from ..model.mesh import BrownianPath, TimeMesh
from ..solver import SolutionPath
from .first import DerivativeField, PathCoefficients, along_path, trapezoid_weights


def _initial_value(pc: PathCoefficients, D: np.ndarray, kr: int, jr: int, kt: int,
                   jt_: int) -> np.ndarray:
    """``Y(max(r, theta))`` for the pair with grid columns ``kr``/``kt``.

    For ``r <= theta`` this is ``D_r[sigma(theta, X(theta), X(theta - tau))]``;
    for ``r > theta`` it is the Itô-integrand term
    ``sigma_x(r) D_theta X(r) + sigma_y(r) D_theta X(r - tau) 1{r >= theta + tau}``.
    """
    L = pc.lag
    if jr <= jt_:
        late, k_early = jt_, kr
        gate = True
    else:
        late, k_early = jr, kt
        gate = jr >= jt_ + L
    delayed = D[late - L, k_early] if (late - L >= 0 and gate) else 0.0
    return pc.sx[late] * D[late, k_early] + pc.sy[late] * delayed


def second_variation_forward(pc: PathCoefficients, D: np.ndarray, dB: np.ndarray, h: float,
                             columns: tuple[int, int], nodes: tuple[int, int],
                             jt: int) -> np.ndarray:
    """Forward Euler for ``D_r D_theta X`` up to node ``jt``.

    ``D`` holds first variations ``(N+1, K, M)``; ``columns`` selects the
    ``r`` and ``theta`` trajectories within it and ``nodes`` gives their
    start indices. Returns the trajectory, shape ``(jt+1, M)``.
    """
    kr, kt = columns
    jr, jth = nodes
    L = pc.lag
    j0 = max(jr, jth)
    M = dB.shape[1:]
    Y = np.zeros((jt + 1,) + M)
    if j0 > jt:
        return Y
    Y[j0] = _initial_value(pc, D, kr, jr, kt, jth)
    zero = np.zeros(M)
    for i in range(j0, jt):
        Dr, Dth = D[i, kr], D[i, kt]
        Drl = D[i - L, kr] if i >= L else zero
        Dthl = D[i - L, kt] if i >= L else zero
        Yl = Y[i - L] if i >= L else zero
        on = 1.0 if i >= jth + L else 0.0
        drift = ((pc.bxx[i] * Dr + pc.bxy[i] * Drl) * Dth
                 + pc.bx[i] * Y[i]
                 + on * (pc.bxy[i] * Dr + pc.byy[i] * Drl) * Dthl
                 + on * pc.by[i] * Yl)
        noise = ((pc.sxx[i] * Dr + pc.sxy[i] * Drl) * Dth
                 + pc.sx[i] * Y[i]
                 + on * (pc.sxy[i] * Dr + pc.syy[i] * Drl) * Dthl
                 + on * pc.sy[i] * Yl)
        Y[i + 1] = Y[i] + drift * h + noise * dB[i]
    return Y


def adjoint_weights(pc: PathCoefficients, dB: np.ndarray, h: float, jt: int) -> np.ndarray:
    """``lam[i] = dY(t_jt)/dY(t_i)`` for the homogeneous linear delay recursion."""
    L = pc.lag
    a = 1.0 + pc.bx[:jt] * h + pc.sx[:jt] * dB[:jt]
    c = pc.by[:jt] * h + pc.sy[:jt] * dB[:jt]
    lam = np.zeros((jt + 1,) + dB.shape[1:])
    lam[jt] = 1.0
    for i in range(jt - 1, -1, -1):
        acc = lam[i + 1] * a[i]
        if i + L < jt:
            acc = acc + lam[i + L + 1] * c[i + L]
        lam[i] = acc
    return lam


def second_variation_grid(pc: PathCoefficients, D: np.ndarray, dB: np.ndarray, h: float,
                          grid: np.ndarray, jt: int) -> np.ndarray:
    """``G[m, a, b] = D_{r_a} D_{theta_b} X(t_jt)`` on path ``m`` for grid nodes ``<= jt``.

    ``D`` is ``(N+1, K, M)`` with column ``k`` started at ``grid[k]``. Pairs
    with a node beyond ``jt`` are zero.
    """
    L = pc.lag
    grid = np.asarray(grid, dtype=int)
    K = grid.size
    M = dB.shape[1]
    lam = adjoint_weights(pc, dB, h, jt)
    # forcing weights lam(i+1) * (h * b'' + dB * sigma'') for steps 0..jt-1
    lw = lam[1: jt + 1]
    sl = slice(0, jt)
    wxx = lw * (pc.bxx[sl] * h + pc.sxx[sl] * dB[sl])
    wxy = lw * (pc.bxy[sl] * h + pc.sxy[sl] * dB[sl])
    wyy = lw * (pc.byy[sl] * h + pc.syy[sl] * dB[sl])
    Dm = np.ascontiguousarray(D[:jt].transpose(2, 1, 0))  # (M, K, jt)
    Dl = np.zeros_like(Dm)
    if L < jt:
        Dl[:, :, L:] = Dm[:, :, : jt - L] if L else Dm
    wxx, wxy, wyy = (w.T[:, None, :] for w in (wxx, wxy, wyy))
    S = np.matmul(Dm * wxx + Dl * wxy, Dm.transpose(0, 2, 1))
    S += np.matmul(Dm * wxy + Dl * wyy, Dl.transpose(0, 2, 1))

    G = np.zeros((M, K, K))
    for a_ in range(K):
        ja = grid[a_]
        if ja > jt:
            continue
        for b_ in range(a_, K):
            jb = grid[b_]
            if jb > jt:
                continue
            # jb >= ja, so the later node is jb and the earlier column is a_
            delayed = D[jb - L, a_] if jb - L >= 0 else 0.0
            init = pc.sx[jb] * D[jb, a_] + pc.sy[jb] * delayed
            val = lam[jb] * init + S[:, a_, b_]
            G[:, a_, b_] = val
            if b_ != a_:
                G[:, b_, a_] = lam[jb] * init + S[:, b_, a_]
    return G


def solve_second_variation(problem: DelaySdeProblem, xpath: SolutionPath, path: BrownianPath,
                           field: DerivativeField, r: float, theta: float, t: float) -> float:
    """``D_r D_theta X(t)`` on one path; ``r`` and ``theta`` must be nodes of ``field``."""
    mesh = path.mesh
    jr, jth, jt = mesh.index_of(r, "r"), mesh.index_of(theta, "theta"), mesh.index_of(t, "t")
    if max(jr, jth) > jt:
        raise InvalidArgumentError("r and theta must not exceed t")
    cols = []
    for j, name in ((jr, "r"), (jth, "theta")):
        hit = np.flatnonzero(field.theta_index == j)
        if hit.size == 0:
            raise InvalidArgumentError(f"{name} is not a node of the derivative field's grid")
        cols.append(int(hit[0]))
    pc = along_path(problem, mesh, xpath.values[:, None], second=True)
    D = field.values.T[:, :, None]
    Y = second_variation_forward(pc, D, path.increments[:, None], mesh.h, tuple(cols),
                                 (jr, jth), jt)
    return float(Y[jt, 0])


@dataclass(eq=False)
class SecondVariationGrid:
    t: float
    theta: np.ndarray
    values: np.ndarray

    def double_integral(self) -> float:
        return float(double_integral_sq(self.values[None], self.theta[1] - self.theta[0],
                                        self.values.shape[0] - 1)[0])


def second_variation_on_grid(problem: DelaySdeProblem, xpath: SolutionPath, path: BrownianPath,
                             field: DerivativeField, t: float) -> SecondVariationGrid:
    mesh = path.mesh
    jt = mesh.index_of(t, "t")
    pc = along_path(problem, mesh, xpath.values[:, None], second=True)
    D = field.values.T[:, :, None]
    keep = field.theta_index <= jt
    G = second_variation_grid(pc, D[:, keep], path.increments[:, None], mesh.h,
                              field.theta_index[keep], jt)[0]
    return SecondVariationGrid(t, field.theta[keep], G)


def double_integral_sq(G: np.ndarray, spacing: float, upto: int) -> np.ndarray:
    """Product-trapezoid of ``|G|^2`` over grid nodes ``0..upto`` in both axes; ``G`` is ``(M, K, K)``."""
    w = trapezoid_weights(upto + 1, spacing)
    sq = G[:, : upto + 1, : upto + 1] ** 2
    return np.einsum("a,mab,b->m", w, sq, w)
