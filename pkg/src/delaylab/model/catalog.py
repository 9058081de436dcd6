"""Benchmark problems with analytic partial derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import InvalidArgumentError, NotFoundError
from .fields import CoefficientField, DelaySdeProblem, InitialSegment


def _const(c: float):
    c = float(c)
    return lambda t, x, y: np.full(np.broadcast(x, y).shape, c)


_ZERO = _const(0.0)


def constant_field(c: float, formula: str) -> CoefficientField:
    return CoefficientField(_const(c), _ZERO, _ZERO, _ZERO, _ZERO, _ZERO,
                            lipschitz=0.0, partial_bound=0.0, second_partial_bound=0.0,
                            depends_on_y=False, formula=formula)


def linear_field(a: float, b: float, formula: str) -> CoefficientField:
    """``a*x + b*y``."""
    a, b = float(a), float(b)
    return CoefficientField(lambda t, x, y: a * x + b * y, _const(a), _const(b),
                            _ZERO, _ZERO, _ZERO,
                            lipschitz=max(abs(a), abs(b)),
                            partial_bound=max(abs(a), abs(b)), second_partial_bound=0.0,
                            depends_on_y=b != 0.0, formula=formula)


def _trig_drift() -> CoefficientField:
    return CoefficientField(
        lambda t, x, y: np.sin(x) + np.cos(y),
        lambda t, x, y: np.cos(x) + 0.0 * y,
        lambda t, x, y: -np.sin(y) + 0.0 * x,
        lambda t, x, y: -np.sin(x) + 0.0 * y,
        _ZERO,
        lambda t, x, y: -np.cos(y) + 0.0 * x,
        lipschitz=1.0, partial_bound=1.0, second_partial_bound=1.0,
        formula="sin(x) + cos(y)",
    )


def _trig_diffusion() -> CoefficientField:
    def d1(t, x, y):
        return -0.5 * np.sin(x + y)

    def d2(t, x, y):
        return -0.5 * np.cos(x + y)

    return CoefficientField(
        lambda t, x, y: 1.0 + 0.5 * np.cos(x + y), d1, d1, d2, d2, d2,
        lipschitz=0.5, partial_bound=0.5, second_partial_bound=0.5,
        formula="1 + cos(x + y)/2",
    )


def _trig_x_drift() -> CoefficientField:
    return CoefficientField(
        lambda t, x, y: np.sin(x) + 0.0 * y,
        lambda t, x, y: np.cos(x) + 0.0 * y,
        _ZERO,
        lambda t, x, y: -np.sin(x) + 0.0 * y,
        _ZERO, _ZERO,
        lipschitz=1.0, partial_bound=1.0, second_partial_bound=1.0,
        depends_on_y=False, formula="sin(x)",
    )


def _trig_x_diffusion() -> CoefficientField:
    return CoefficientField(
        lambda t, x, y: 1.0 + 0.5 * np.cos(x) + 0.0 * y,
        lambda t, x, y: -0.5 * np.sin(x) + 0.0 * y,
        _ZERO,
        lambda t, x, y: -0.5 * np.cos(x) + 0.0 * y,
        _ZERO, _ZERO,
        lipschitz=0.5, partial_bound=0.5, second_partial_bound=0.5,
        depends_on_y=False, formula="1 + cos(x)/2",
    )


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    summary: str
    params: dict
    build: Callable[[dict], tuple]
    param_docs: Optional[dict] = None


def _pure_noise(p):
    return constant_field(0.0, "0"), constant_field(1.0, "1"), 1.0


def _delayed_drift_ode(p):
    return linear_field(0.0, 1.0, "y"), constant_field(0.0, "0"), 0.0


def _linear_additive(p):
    s = float(p["sigma0"])
    return linear_field(p["a"], 0.0, f"{p['a']}*x"), constant_field(s, f"{s}"), abs(s)


def _linear_delay(p):
    s = float(p["sigma0"])
    return (linear_field(p["alpha"], p["beta"], f"{p['alpha']}*x + {p['beta']}*y"),
            constant_field(s, f"{s}"), abs(s))


def _constant(p):
    s = float(p["sigma"])
    return constant_field(p["drift"], f"{p['drift']}"), constant_field(s, f"{s}"), abs(s)


def _trig(p):
    return _trig_drift(), _trig_diffusion(), 0.5


def _trig_x(p):
    return _trig_x_drift(), _trig_x_diffusion(), 0.5


CATALOG: dict[str, CatalogEntry] = {
    e.name: e
    for e in [
        CatalogEntry("pure_noise", "b = 0, sigma = 1; X = phi(0) + B", {}, _pure_noise),
        CatalogEntry("delayed_drift_ode", "b = y, sigma = 0; deterministic lagged ODE", {},
                     _delayed_drift_ode),
        CatalogEntry("linear_additive", "b = a*x, sigma = sigma0 (constant)",
                     {"a": 1.0, "sigma0": 1.0}, _linear_additive,
                     {"a": "drift rate", "sigma0": "constant diffusion"}),
        CatalogEntry("linear_delay", "b = alpha*x + beta*y, sigma = sigma0 (constant)",
                     {"alpha": -1.0, "beta": 0.5, "sigma0": 1.0}, _linear_delay,
                     {"alpha": "instantaneous drift rate", "beta": "delayed drift rate",
                      "sigma0": "constant diffusion"}),
        CatalogEntry("constant", "b = drift, sigma = sigma (both constant)",
                     {"drift": 1.0, "sigma": 2.0}, _constant,
                     {"drift": "constant drift", "sigma": "constant diffusion"}),
        CatalogEntry("trig", "b = sin(x) + cos(y), sigma = 1 + cos(x + y)/2", {}, _trig),
        CatalogEntry("trig_x", "b = sin(x), sigma = 1 + cos(x)/2 (no delayed argument)", {},
                     _trig_x),
    ]
}


def catalog_names() -> list[str]:
    return list(CATALOG)


def catalog_problem(name: str, params: Optional[dict] = None, *, tau: float = 0.0,
                    T: float = 1.0, phi: Optional[InitialSegment] = None) -> DelaySdeProblem:
    """Instantiate a catalog problem.

    >>> catalog_problem("pure_noise", tau=0.5, phi=InitialSegment.constant(2.0)).sigma0
    1.0
    """
    try:
        entry = CATALOG[name]
    except KeyError:
        raise NotFoundError(f"unknown problem {name!r}; known: {', '.join(CATALOG)}") from None
    params = dict(params or {})
    unknown = set(params) - set(entry.params)
    if unknown:
        raise InvalidArgumentError(f"problem {name!r} has no parameter(s) {sorted(unknown)}")
    merged = {**entry.params, **{k: float(v) for k, v in params.items()}}
    b, sigma, sigma0 = entry.build(merged)
    return DelaySdeProblem(b, sigma, float(tau), float(T),
                           phi if phi is not None else InitialSegment.constant(0.0),
                           sigma0=sigma0, name=name, params=merged)


def describe(name: str) -> str:
    if name not in CATALOG:
        raise NotFoundError(f"unknown problem {name!r}")
    entry = CATALOG[name]
    p = catalog_problem(name)
    lines = [
        f"{name}: {entry.summary}",
        f"  b(t,x,y)     = {p.b.formula}",
        f"  sigma(t,x,y) = {p.sigma.formula}",
        f"  sigma0 = {p.sigma0:g}",
        f"  L = {p.lipschitz:g}  (b: {p.b.lipschitz:g}, sigma: {p.sigma.lipschitz:g})",
        f"  second partials bounded by {max(p.b.second_partial_bound, p.sigma.second_partial_bound):g}",
        f"  delayed argument used: {'yes' if (p.b.depends_on_y or p.sigma.depends_on_y) else 'no'}",
    ]
    if entry.params:
        lines.append("  parameters:")
        for k, v in entry.params.items():
            doc = (entry.param_docs or {}).get(k, "")
            lines.append(f"    {k} (default {v:g}): {doc}")
    return "\n".join(lines)
