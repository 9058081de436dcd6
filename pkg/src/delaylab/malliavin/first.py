"""First variation (Malliavin derivative) of the Euler delay scheme.

For a grid node ``theta = t_j`` the derivative trajectory starts at
``D_theta X(t_j) = sigma(t_j, X(t_j), X(t_j - tau))``, vanishes before
``t_j`` and then follows the linear delay equation

    D(t_{i+1}) = D(t_i) + (b_x D(t_i) + b_y D(t_i - tau)) h
                        + (sigma_x D(t_i) + sigma_y D(t_i - tau)) dB_i

with partials evaluated at ``(t_i, X(t_i), X(t_i - tau))``. The delayed
term switches on by itself at ``t_i = theta + tau`` because the stored
trajectory is zero before ``theta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import MCEstimate, chunk_for, map_paths, mean_stderr
from ..errors import CapabilityError, EllipticityError, InvalidArgumentError
from ..model.fields import DelaySdeProblem
from ..model.mesh import BrownianPath, TimeMesh
from ..solver import SolutionPath, euler_batch, history_values, lag_steps

FIRST = ("d_x", "d_y")
SECOND = ("d_xx", "d_xy", "d_yy")


@dataclass(eq=False)
class PathCoefficients:
    """Coefficients and partials along trajectories, each of shape ``(N+1, M)``."""

    lag: int
    sigma: np.ndarray
    bx: np.ndarray
    by: np.ndarray
    sx: np.ndarray
    sy: np.ndarray
    bxx: np.ndarray = None
    bxy: np.ndarray = None
    byy: np.ndarray = None
    sxx: np.ndarray = None
    sxy: np.ndarray = None
    syy: np.ndarray = None


def delayed_states(problem: DelaySdeProblem, mesh: TimeMesh, X: np.ndarray) -> np.ndarray:
    lag = lag_steps(problem, mesh)
    Y = np.empty_like(X)
    if lag:
        Y[lag:] = X[:-lag]
        Y[:lag] = history_values(problem.phi, mesh, lag).reshape((lag,) + (1,) * (X.ndim - 1))
    else:
        Y[:] = X
    return Y


def require_partials(problem: DelaySdeProblem, second: bool = False) -> None:
    names = FIRST + (SECOND if second else ())
    for label, coef in (("b", problem.b), ("sigma", problem.sigma)):
        missing = [n for n in names if getattr(coef, n) is None]
        if missing:
            raise CapabilityError(f"{label} of problem {problem.name!r} lacks partials {missing}")


def along_path(problem: DelaySdeProblem, mesh: TimeMesh, X: np.ndarray,
               second: bool = False) -> PathCoefficients:
    require_partials(problem, second)
    Y = delayed_states(problem, mesh, X)
    t = mesh.nodes.reshape((-1,) + (1,) * (X.ndim - 1))
    shape = X.shape

    def ev(fn):
        return np.broadcast_to(fn(t, X, Y), shape).astype(float, copy=False)

    b, s = problem.b, problem.sigma
    out = PathCoefficients(lag_steps(problem, mesh), ev(s.value), ev(b.d_x), ev(b.d_y),
                           ev(s.d_x), ev(s.d_y))
    if second:
        out.bxx, out.bxy, out.byy = ev(b.d_xx), ev(b.d_xy), ev(b.d_yy)
        out.sxx, out.sxy, out.syy = ev(s.d_xx), ev(s.d_xy), ev(s.d_yy)
    return out


def variation_batch(pc: PathCoefficients, dB: np.ndarray, h: float, starts) -> np.ndarray:
    """First variations for several start nodes at once.

    ``starts`` are node indices ``j_k``; returns ``D`` of shape
    ``(N+1, K, M)`` with ``D[i, k] = D_{t_{j_k}} X(t_i)``.
    """
    starts = np.asarray(starts, dtype=int)
    N = dB.shape[0]
    lag = pc.lag
    a = 1.0 + pc.bx[:N] * h + pc.sx[:N] * dB
    c = pc.by[:N] * h + pc.sy[:N] * dB
    D = np.zeros((N + 1, starts.size) + dB.shape[1:])
    by_node = {}
    for k, j in enumerate(starts):
        by_node.setdefault(int(j), []).append(k)
    if 0 in by_node:
        D[0, by_node[0]] = pc.sigma[0]
    for i in range(N):
        if lag and i >= lag:
            np.add(D[i] * a[i], D[i - lag] * c[i], out=D[i + 1])
        elif lag:
            np.multiply(D[i], a[i], out=D[i + 1])
        else:
            np.multiply(D[i], a[i] + c[i], out=D[i + 1])
        ks = by_node.get(i + 1)
        if ks:
            D[i + 1, ks] = pc.sigma[i + 1]
    return D


def solve_first_variation(problem: DelaySdeProblem, xpath: SolutionPath, path: BrownianPath,
                          theta: float) -> np.ndarray:
    """Trajectory ``t_i -> D_theta X(t_i)`` on the mesh (zero before ``theta``)."""
    mesh = path.mesh
    j = mesh.index_of(theta, "theta")
    X = xpath.values[:, None]
    pc = along_path(problem, mesh, X)
    return variation_batch(pc, path.increments[:, None], mesh.h, [j])[:, 0, 0]


def theta_grid(mesh: TimeMesh, K: int) -> np.ndarray:
    """Indices of every ``N/K``-th node: ``K + 1`` nodes from 0 to T."""
    if int(K) != K or K < 1 or K > mesh.N or mesh.N % K:
        raise InvalidArgumentError(f"grid size K={K!r} must divide the step count N={mesh.N}")
    return np.arange(K + 1) * (mesh.N // int(K))


@dataclass(eq=False)
class DerivativeField:
    """``values[k, i] = D_{theta_k} X(t_i)`` for one path; zero where ``theta_k > t_i``."""

    mesh: TimeMesh
    theta_index: np.ndarray
    values: np.ndarray

    @property
    def theta(self) -> np.ndarray:
        return self.theta_index * self.mesh.h

    def at(self, t: float) -> np.ndarray:
        return self.values[:, self.mesh.index_of(t)]


def derivative_field(problem: DelaySdeProblem, xpath: SolutionPath, path: BrownianPath,
                     K: int = 64) -> DerivativeField:
    mesh = path.mesh
    J = theta_grid(mesh, K)
    pc = along_path(problem, mesh, xpath.values[:, None])
    D = variation_batch(pc, path.increments[:, None], mesh.h, J)[:, :, 0]
    return DerivativeField(mesh, J, np.ascontiguousarray(D.T))


def trapezoid_weights(n_nodes: int, spacing: float) -> np.ndarray:
    w = np.full(n_nodes, spacing)
    if n_nodes:
        w[0] = w[-1] = 0.5 * spacing
    if n_nodes == 1:
        w[0] = 0.0
    return w


def grid_position(theta_index: np.ndarray, mesh: TimeMesh, t: float) -> int:
    """Position of ``t`` within the theta grid; it must be a grid node."""
    if t > mesh.T * (1 + 1e-12) or t < 0:
        raise InvalidArgumentError(f"t={t!r} lies beyond the field range [0, {mesh.T}]")
    j = mesh.index_of(t)
    pos = np.searchsorted(theta_index, j)
    if pos >= theta_index.size or theta_index[pos] != j:
        raise InvalidArgumentError(f"t={t!r} is not a node of the theta grid")
    return int(pos)


def norm_sq_from_terminal(Dt: np.ndarray, spacing: float, upto: int) -> np.ndarray:
    """Trapezoid of ``|D_theta X(t)|^2`` over grid nodes ``0..upto``; ``Dt`` is ``(K+1, ...)``."""
    w = trapezoid_weights(upto + 1, spacing)
    return np.tensordot(w, Dt[: upto + 1] ** 2, axes=(0, 0))


def malliavin_norm_sq(field: DerivativeField, t: float) -> float:
    pos = grid_position(field.theta_index, field.mesh, t)
    spacing = (field.theta_index[1] - field.theta_index[0]) * field.mesh.h
    return float(norm_sq_from_terminal(field.at(t), spacing, pos))


def require_elliptic(problem: DelaySdeProblem) -> None:
    if not problem.sigma0 > 0:
        raise EllipticityError(
            f"problem {problem.name!r} has sigma0={problem.sigma0}; a positive lower bound on "
            "|sigma| is required"
        )


def terminal_variations(problem: DelaySdeProblem, mesh: TimeMesh, dB: np.ndarray, J,
                        jt: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve paths and return ``(X, D, D[jt])`` for start nodes ``J``."""
    X = euler_batch(problem, mesh, dB)
    pc = along_path(problem, mesh, X)
    D = variation_batch(pc, dB, mesh.h, J)
    return X, D, D[jt]


def norm_moment(problem: DelaySdeProblem, t: float, p: float, paths: int, K: int = 64,
                seed: int = 0, steps: int = 4096, workers=None) -> MCEstimate:
    """Monte Carlo estimate of ``E ||D X(t)||^(2p)`` (trapezoid on ``K + 1`` theta nodes)."""
    if not t > 0:
        raise InvalidArgumentError(f"t must be positive, got {t!r}")
    mesh = TimeMesh(problem.T, steps)
    J = theta_grid(mesh, K)
    pos = grid_position(J, mesh, t)
    jt = int(J[pos])
    spacing = J[1] * mesh.h

    def kernel(dB):
        _, _, Dt = terminal_variations(problem, mesh, dB, J[: pos + 1], jt)
        return {"v": norm_sq_from_terminal(Dt, spacing, pos) ** p}

    chunk = chunk_for(paths, 8.0 * (mesh.N + 1) * (pos + 4))
    res = map_paths(kernel, mesh, paths, seed, chunk=chunk, workers=workers)
    return mean_stderr(res["v"])


def inverse_moment(problem: DelaySdeProblem, t: float, p: float, paths: int, K: int = 64,
                   seed: int = 0, steps: int = 4096, workers=None) -> MCEstimate:
    """Monte Carlo estimate of ``E ||D X(t)||^(-2p)`` over ``paths`` paths."""
    require_elliptic(problem)
    return norm_moment(problem, t, -p, paths, K, seed, steps, workers)
