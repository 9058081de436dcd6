"""Coefficient fields, initial segments, delay problems and test functions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from ..errors import CapabilityError, InvalidArgumentError

Coefficient = Callable[[float, np.ndarray, np.ndarray], np.ndarray]

_PARTIALS = ("d_x", "d_y", "d_xx", "d_xy", "d_yy")


@dataclass(frozen=True)
class CoefficientField:
    """A coefficient ``h(t, x, y)`` with its first and second partials.

    ``x`` is the current state and ``y`` the delayed one. Callables take a
    scalar ``t`` and broadcastable arrays ``x``, ``y``. Partials left as
    ``None`` are unavailable; operations that need them raise
    :class:`CapabilityError`.
    """

    value: Coefficient
    d_x: Optional[Coefficient] = None
    d_y: Optional[Coefficient] = None
    d_xx: Optional[Coefficient] = None
    d_xy: Optional[Coefficient] = None
    d_yy: Optional[Coefficient] = None
    lipschitz: float = 0.0
    partial_bound: float = np.inf
    second_partial_bound: float = np.inf
    depends_on_y: bool = True
    formula: str = ""

    def partial(self, name: str) -> Coefficient:
        fn = getattr(self, name)
        if fn is None:
            raise CapabilityError(f"coefficient {self.formula or '<anonymous>'} has no {name}")
        return fn

    def has_first_partials(self) -> bool:
        return self.d_x is not None and self.d_y is not None

    def has_second_partials(self) -> bool:
        return all(getattr(self, n) is not None for n in _PARTIALS)


def sample_points(T: float, n: int = 100, box: float = 4.0) -> np.ndarray:
    """Deterministic Halton points in ``[0,T] x [-box,box]^2``, shape ``(n, 3)``."""
    u = qmc.Halton(d=3, scramble=False).random(n + 1)[1:]
    return qmc.scale(u, [0.0, -box, -box], [T, box, box])


def check_partials(coef: CoefficientField, T: float, n: int = 100, rtol: float = 1e-6,
                   step: float = 1e-5) -> dict[str, float]:
    """Worst relative mismatch between each analytic partial and a central difference.

    Returns ``{partial name: max |analytic - fd| / (1 + |analytic|)}`` over the
    sample points; callers compare against ``rtol``.
    """
    pts = sample_points(T, n)
    t, x, y = pts[:, 0], pts[:, 1], pts[:, 2]
    worst = {}

    def fd(fn, axis):
        dx = step if axis == 0 else 0.0
        dy = step if axis == 1 else 0.0
        return np.array([(fn(ti, xi + dx, yi + dy) - fn(ti, xi - dx, yi - dy)) / (2 * step)
                         for ti, xi, yi in zip(t, x, y)], dtype=float)

    def ev(fn):
        return np.array([fn(ti, xi, yi) for ti, xi, yi in zip(t, x, y)], dtype=float)

    pairs = [("d_x", coef.value, 0), ("d_y", coef.value, 1)]
    if coef.d_x is not None:
        pairs += [("d_xx", coef.d_x, 0), ("d_xy", coef.d_x, 1)]
    if coef.d_y is not None:
        pairs += [("d_yy", coef.d_y, 1)]
    for name, base, axis in pairs:
        analytic = getattr(coef, name)
        if analytic is None or base is None:
            continue
        a = ev(analytic)
        worst[name] = float(np.max(np.abs(a - fd(base, axis)) / (1.0 + np.abs(a))))
    return worst


@dataclass(frozen=True)
class InitialSegment:
    """Deterministic history ``phi(t)`` for ``t <= 0``.

    ``kind="constant"`` gives ``phi = x0``; ``kind="holder"`` gives
    ``phi(t) = x0 + c*|t|**beta``, which is Hölder with exponent ``beta`` and
    constant ``c``.
    """

    kind: str = "constant"
    x0: float = 0.0
    c: float = 0.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "holder"):
            raise InvalidArgumentError(f"unknown initial segment kind {self.kind!r}")
        if not (0.0 < self.beta <= 1.0):
            raise InvalidArgumentError(f"Hölder exponent beta must lie in (0, 1], got {self.beta!r}")

    @classmethod
    def constant(cls, x0: float) -> "InitialSegment":
        return cls("constant", float(x0))

    @classmethod
    def holder(cls, x0: float, c: float, beta: float) -> "InitialSegment":
        return cls("holder", float(x0), float(c), float(beta))

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t > 0):
            raise InvalidArgumentError("initial segment is only defined for t <= 0")
        if self.kind == "constant":
            return np.full(t.shape, self.x0) if t.ndim else self.x0
        out = self.x0 + self.c * np.abs(t) ** self.beta
        return out if t.ndim else float(out)

    def holder_ratio(self, span: float, n: int = 200, seed: int = 0) -> float:
        """Largest ``|phi(s)-phi(t)| / |s-t|**beta`` over sampled pairs in ``[-span, 0]``."""
        rng = np.random.default_rng(seed)
        s = -span * rng.random(n)
        t = -span * rng.random(n)
        keep = s != t
        s, t = s[keep], t[keep]
        return float(np.max(np.abs(self.evaluate(s) - self.evaluate(t)) / np.abs(s - t) ** self.beta))


@dataclass(frozen=True)
class DelaySdeProblem:
    """``dX = b(t, X(t), X(t-tau)) dt + sigma(t, X(t), X(t-tau)) dB`` with history ``phi``."""

    b: CoefficientField
    sigma: CoefficientField
    tau: float
    T: float
    phi: InitialSegment = field(default_factory=InitialSegment)
    sigma0: float = 0.0
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.tau >= 0):
            raise InvalidArgumentError(f"delay tau must be nonnegative, got {self.tau!r}")
        if not (self.T > 0):
            raise InvalidArgumentError(f"horizon T must be positive, got {self.T!r}")
        if self.sigma0 < 0:
            raise InvalidArgumentError(f"sigma0 must be nonnegative, got {self.sigma0!r}")
        if self.sigma0 > 0:
            pts = sample_points(self.T)
            vals = np.abs([self.sigma.value(t, x, y) for t, x, y in pts])
            if np.min(vals) < self.sigma0 * (1 - 1e-12):
                raise InvalidArgumentError(
                    f"declared sigma0={self.sigma0} but |sigma| drops to {np.min(vals):.6g}"
                )

    @property
    def lipschitz(self) -> float:
        return self.b.lipschitz + self.sigma.lipschitz

    def with_tau(self, tau: float) -> "DelaySdeProblem":
        return DelaySdeProblem(self.b, self.sigma, float(tau), self.T, self.phi,
                               self.sigma0, self.name, dict(self.params))

    def with_phi(self, phi: InitialSegment) -> "DelaySdeProblem":
        return DelaySdeProblem(self.b, self.sigma, self.tau, self.T, phi,
                               self.sigma0, self.name, dict(self.params))


@dataclass(frozen=True)
class TestFunction:
    """Bounded test function ``g`` for weak errors.

    ``K`` is the location parameter: ``indicator`` is ``1{x <= K}``, ``sign``
    is ``sign(x - K)`` and ``sine`` is ``sin(x - K)``.
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    evaluate: Callable[[np.ndarray], np.ndarray]
    bound: float
    K: float = 0.0
    lipschitz: bool = False

    def __call__(self, x):
        return self.evaluate(x)

    @classmethod
    def indicator(cls, K: float = 0.0) -> "TestFunction":
        return cls("indicator", lambda x: (np.asarray(x) <= K).astype(float), 1.0, K)

    @classmethod
    def sign(cls, K: float = 0.0) -> "TestFunction":
        return cls("sign", lambda x: np.sign(np.asarray(x, dtype=float) - K), 1.0, K)

    @classmethod
    def sine(cls, K: float = 0.0) -> "TestFunction":
        return cls("sine", lambda x: np.sin(np.asarray(x, dtype=float) - K), 1.0, K,
                   lipschitz=True)

    @classmethod
    def custom(cls, fn, bound: float, lipschitz: bool = False) -> "TestFunction":
        return cls("custom", lambda x: np.asarray(fn(np.asarray(x, dtype=float)), dtype=float),
                   float(bound), lipschitz=lipschitz)

    @classmethod
    def from_kind(cls, kind: str, K: float = 0.0) -> "TestFunction":
        makers = {"indicator": cls.indicator, "sign": cls.sign, "sine": cls.sine}
        if kind not in makers:
            raise InvalidArgumentError(f"unknown test function kind {kind!r}")
        return makers[kind](K)

    def in_unit_ball(self) -> bool:
        return self.bound <= 1.0

    def sup_on(self, xs) -> float:
        return float(np.max(np.abs(self.evaluate(np.asarray(xs, dtype=float)))))
