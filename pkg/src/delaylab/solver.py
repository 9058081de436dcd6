"""Euler–Maruyama for scalar SDEs with one constant delay.

Everything here is vectorised over independent paths: a batch of increments
of shape ``(N, M)`` produces trajectories of shape ``(N + 1, M)``. The
single-path functions are thin wrappers over the batch kernel, so they agree
bit-for-bit with it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .model.fields import CoefficientField, DelaySdeProblem, InitialSegment
from .model.mesh import BrownianPath, TimeMesh


@dataclass(frozen=True, eq=False)
class SolutionPath:
    mesh: TimeMesh
    values: np.ndarray
    problem: DelaySdeProblem
    seed: int = 0
    path_index: int = 0

    def at(self, t: float) -> float:
        return float(self.values[self.mesh.index_of(t)])


def check_horizon(problem: DelaySdeProblem, mesh: TimeMesh) -> None:
    if abs(problem.T - mesh.T) > 1e-12 * max(1.0, mesh.T):
        raise InvalidArgumentError(
            f"problem horizon T={problem.T} does not match mesh horizon {mesh.T}"
        )


def lag_steps(problem: DelaySdeProblem, mesh: TimeMesh) -> int:
    """Delay measured in mesh steps; :class:`AlignmentError` if tau is off-mesh."""
    if problem.tau == 0:
        return 0
    return mesh.steps_for(problem.tau, "tau")


def history_values(phi: InitialSegment, mesh: TimeMesh, lag: int) -> np.ndarray:
    """``phi(t_i - tau)`` for the ``lag`` first steps, where the delayed state is still history."""
    return np.asarray(phi.evaluate((np.arange(lag) - lag) * mesh.h), dtype=float).reshape(lag)


def delayed(X: np.ndarray, pre: np.ndarray, i: int, lag: int):
    """State at ``t_i - tau`` given the trajectory so far."""
    return X[i - lag] if i >= lag else pre[i]


def euler_batch(problem: DelaySdeProblem, mesh: TimeMesh, dB: np.ndarray) -> np.ndarray:
    """Left-point Euler scheme for a batch of paths.

    ``X[i+1] = X[i] + b(t_i, X[i], X[i-L]) h + sigma(t_i, X[i], X[i-L]) dB[i]``
    with ``L = tau/h`` and ``X[j] = phi(t_j)`` for ``j <= 0``. Delayed
    lookups always land on mesh nodes.
    """
    check_horizon(problem, mesh)
    dB = np.asarray(dB, dtype=float)
    if dB.shape[0] != mesh.N:
        raise InvalidArgumentError(f"expected {mesh.N} increments per path, got {dB.shape[0]}")
    lag = lag_steps(problem, mesh)
    pre = history_values(problem.phi, mesh, lag)
    h = mesh.h
    t = mesh.nodes
    b, s = problem.b.value, problem.sigma.value
    X = np.empty((mesh.N + 1,) + dB.shape[1:])
    X[0] = problem.phi.evaluate(0.0)
    for i in range(mesh.N):
        x = X[i]
        y = delayed(X, pre, i, lag)
        X[i + 1] = x + b(t[i], x, y) * h + s(t[i], x, y) * dB[i]
    return X


def solve_euler_delay(problem: DelaySdeProblem, path: BrownianPath) -> SolutionPath:
    X = euler_batch(problem, path.mesh, path.increments[:, None])[:, 0]
    return SolutionPath(path.mesh, X, problem, path.seed, path.path_index)


def solve_pair_coupled(p1: DelaySdeProblem, p2: DelaySdeProblem,
                       path: BrownianPath) -> tuple[SolutionPath, SolutionPath]:
    """Both problems driven by the same increments (common random numbers)."""
    check_coupled(p1, p2)
    return solve_euler_delay(p1, path), solve_euler_delay(p2, path)


def check_coupled(p1: DelaySdeProblem, p2: DelaySdeProblem) -> None:
    if abs(p1.T - p2.T) > 1e-12 * max(1.0, p1.T):
        raise InvalidArgumentError(f"horizon mismatch: T={p1.T} vs T={p2.T}")
    if p1.phi.evaluate(0.0) != p2.phi.evaluate(0.0):
        raise InvalidArgumentError(
            f"initial values differ: phi1(0)={p1.phi.evaluate(0.0)} vs phi2(0)={p2.phi.evaluate(0.0)}"
        )


def _lagged_field(base: CoefficientField) -> CoefficientField:
    """``h~(t, x, y) = h(t, y)``: the coefficient sees only the lagged state."""
    f = base

    def value(t, x, y):
        return f.value(t, y, y) + 0.0 * x

    def zero(t, x, y):
        return np.zeros(np.broadcast(x, y).shape)

    d_y = d_yy = None
    if f.d_x is not None:
        def d_y(t, x, y):
            return f.d_x(t, y, y) + 0.0 * x
    if f.d_xx is not None:
        def d_yy(t, x, y):
            return f.d_xx(t, y, y) + 0.0 * x

    return CoefficientField(
        value, zero, d_y, zero, zero, d_yy,
        lipschitz=f.lipschitz, partial_bound=f.partial_bound,
        second_partial_bound=f.second_partial_bound, depends_on_y=True,
        formula=f"({f.formula}) at x(t - 1/n)",
    )


def build_caratheodory_problem(base: DelaySdeProblem, n: int) -> DelaySdeProblem:
    """Carathéodory approximation of a non-delayed SDE as a delay problem.

    The scheme evaluates both coefficients at ``x(t - 1/n)``, which is exactly
    a delay SDE with ``tau = 1/n``, history ``x0`` on ``[-1/n, 0]`` and
    coefficients ``b(t, y)``, ``sigma(t, y)``.
    """
    if int(n) != n or n < 1:
        raise InvalidArgumentError(f"n must be a positive integer, got {n!r}")
    if base.tau != 0:
        raise InvalidArgumentError(f"base problem must have tau = 0, got {base.tau}")
    if base.b.depends_on_y or base.sigma.depends_on_y:
        raise InvalidArgumentError(
            f"base problem {base.name!r} has coefficients depending on the delayed state"
        )
    x0 = float(base.phi.evaluate(0.0))
    return DelaySdeProblem(
        _lagged_field(base.b), _lagged_field(base.sigma), 1.0 / int(n), base.T,
        InitialSegment.constant(x0), sigma0=base.sigma0,
        name=f"caratheodory[{base.name}, n={int(n)}]", params={**base.params, "n": int(n)},
    )
