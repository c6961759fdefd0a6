"""Compactly supported C^2 test functions with exact first and second partials.

Every catalog member is separable, ``f(x) = scale * prod_j u_j(x_j)``, so
products ``f * g`` stay separable and their derivatives follow from the 1-D
product rule.  All evaluators are vectorised over an ``(m, n)`` array of states.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class Factor:
    """One-dimensional factor: value, first and second derivative on ``[0, inf)``."""

    support = math.inf  # u vanishes identically beyond this point
    knots: tuple = ()

    def eval(self, u):  # -> (value, d1, d2)
        raise NotImplementedError

    def __mul__(self, other: "Factor") -> "Factor":
        return ProductFactor(self, other)


@dataclass(frozen=True)
class Const(Factor):
    c: float = 1.0

    def eval(self, u):
        z = np.zeros_like(u)
        return self.c + z, z, z


@dataclass(frozen=True)
class Bump(Factor):
    """``psi((u - center)/radius)`` with ``psi(v) = (1 - v^2)^3`` on ``|v| <= 1``."""

    center: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("bump radius must be positive")

    @property
    def support(self):
        return self.center + self.radius

    @property
    def knots(self):
        return tuple(t for t in (self.center - self.radius, self.center + self.radius) if t > 0)

    def eval(self, u):
        R = self.radius
        v = (u - self.center) / R
        inside = np.abs(v) < 1
        w = np.where(inside, 1.0 - v * v, 0.0)
        val = w**3
        d1 = -6.0 * v * w**2 / R
        d2 = w * (30.0 * v * v - 6.0) / (R * R)
        return val, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


@dataclass(frozen=True)
class Cutoff(Factor):
    """Equal to 1 on ``[0, a]``, C^2 quintic smoothstep down to 0 on ``[a, b]``."""

    a: float
    b: float

    def __post_init__(self):
        if not 0 <= self.a < self.b:
            raise ValueError("cutoff needs 0 <= a < b")

    @property
    def support(self):
        return self.b

    @property
    def knots(self):
        return tuple(t for t in (self.a, self.b) if t > 0)

    def eval(self, u):
        w = self.b - self.a
        t = np.clip((u - self.a) / w, 0.0, 1.0)
        val = 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t * t)
        d1 = -30.0 * t * t * (1.0 - t) ** 2 / w
        d2 = -60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (w * w)
        return val, d1, d2


@dataclass(frozen=True)
class Monomial(Factor):
    power: int

    def eval(self, u):
        p = self.power
        if p == 0:
            return Const(1.0).eval(u)
        val = u**p
        d1 = p * u ** (p - 1)
        d2 = p * (p - 1) * u ** (p - 2) if p >= 2 else np.zeros_like(u)
        return val, d1, d2


@dataclass(frozen=True)
class ProductFactor(Factor):
    left: Factor
    right: Factor

    @property
    def support(self):
        return min(self.left.support, self.right.support)

    @property
    def knots(self):
        return tuple(sorted(set(self.left.knots) | set(self.right.knots)))

    def eval(self, u):
        f, f1, f2 = self.left.eval(u)
        g, g1, g2 = self.right.eval(u)
        return f * g, f1 * g + f * g1, f2 * g + 2.0 * f1 * g1 + f * g2


class TestFunction:
    """Separable function on ``E``; ``value``, ``grad`` and ``hess_diag`` take ``(m, n)`` arrays."""

    __test__ = False  # not a pytest class

    def __init__(self, factors, scale: float = 1.0, name: str | None = None):
        self.factors = tuple(factors)
        self.scale = float(scale)
        self.name = name or "f"

    @property
    def n(self) -> int:
        return len(self.factors)

    @property
    def support(self) -> np.ndarray:
        """Per-coordinate bound beyond which ``f`` vanishes (``inf`` if none)."""
        return np.array([fac.support for fac in self.factors], dtype=float)

    @property
    def knots(self) -> list[tuple]:
        return [fac.knots for fac in self.factors]

    @property
    def compact(self) -> bool:
        return bool(np.any(np.isfinite(self.support))) or self.scale == 0.0

    def _parts(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise ValueError(f"{self.name} expects states of dimension {self.n}")
        vals, d1s, d2s = zip(*(fac.eval(X[:, j]) for j, fac in enumerate(self.factors)))
        return np.stack(vals, 1), np.stack(d1s, 1), np.stack(d2s, 1)

    @staticmethod
    def _others(v):
        # product over all factors except column j, without dividing by zero
        n = v.shape[1]
        left = np.ones_like(v)
        right = np.ones_like(v)
        for j in range(1, n):
            left[:, j] = left[:, j - 1] * v[:, j - 1]
            right[:, n - 1 - j] = right[:, n - j] * v[:, n - j]
        return left * right

    def value(self, X) -> np.ndarray:
        v, _, _ = self._parts(X)
        return self.scale * v.prod(axis=1)

    def grad(self, X) -> np.ndarray:
        v, d1, _ = self._parts(X)
        return self.scale * d1 * self._others(v)

    def hess_diag(self, X) -> np.ndarray:
        v, _, d2 = self._parts(X)
        return self.scale * d2 * self._others(v)

    def derivatives(self, X):
        """``(value, grad, hess_diag)`` in one pass."""
        v, d1, d2 = self._parts(X)
        rest = self._others(v)
        return self.scale * v.prod(axis=1), self.scale * d1 * rest, self.scale * d2 * rest

    def __call__(self, X):
        return self.value(X)

    def __mul__(self, other: "TestFunction") -> "TestFunction":
        if other.n != self.n:
            raise ValueError("dimension mismatch")
        facs = [a * b for a, b in zip(self.factors, other.factors)]
        return TestFunction(facs, self.scale * other.scale, f"({self.name})*({other.name})")

    def __repr__(self) -> str:
        return f"TestFunction({self.name})"


def _vec(x, n):
    arr = np.broadcast_to(np.asarray(x, dtype=float), (n,))
    return [float(t) for t in arr]


def constant(n: int, c: float = 1.0) -> TestFunction:
    return TestFunction([Const(1.0)] * n, c, f"const({c:g})")


def bump(n: int, center=0.0, radius=1.0, name: str | None = None) -> TestFunction:
    cs, rs = _vec(center, n), _vec(radius, n)
    facs = [Bump(c, r) for c, r in zip(cs, rs)]
    return TestFunction(facs, 1.0, name or f"bump(c={cs},R={rs})")


def cutoff(n: int, a=1.0, b=2.0, name: str | None = None) -> TestFunction:
    As, Bs = _vec(a, n), _vec(b, n)
    return TestFunction([Cutoff(x, y) for x, y in zip(As, Bs)], 1.0,
                        name or f"cutoff({As},{Bs})")


def truncated_coordinate(n: int, j: int, k: float = 1.0) -> TestFunction:
    """``x_j`` on ``[0, k+1)^n`` smoothly cut to zero outside ``[0, k+2)^n``."""
    cut = Cutoff(k + 1.0, k + 2.0)
    facs = [Monomial(1) * cut if i == j else cut for i in range(n)]
    return TestFunction(facs, 1.0, f"pi_{j + 1}^{k:g}")


def monomial_bump(n: int, powers, center=0.0, radius=1.0) -> TestFunction:
    ps = [int(p) for p in np.broadcast_to(powers, (n,))]
    cs, rs = _vec(center, n), _vec(radius, n)
    facs = [Monomial(p) * Bump(c, r) for p, c, r in zip(ps, cs, rs)]
    return TestFunction(facs, 1.0, f"x^{ps}*bump(c={cs},R={rs})")


def flattened_bump(n: int, theta: float, radius: float = 1.0) -> TestFunction:
    """Bump whose support edge sits at ``theta * radius`` above every face.

    All partials on the faces scale like powers of ``theta`` and vanish at
    ``theta = 0``; used to probe the Wentzell boundary condition.
    """
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    c = radius * (1.0 - theta)
    return bump(n, c, radius, name=f"flat_bump(theta={theta:g})")


FAMILIES = {
    "constant": lambda n, p: constant(n, p.get("c", 1.0)),
    "bump": lambda n, p: bump(n, p.get("center", 0.0), p.get("radius", 1.0)),
    "cutoff": lambda n, p: cutoff(n, p.get("a", 1.0), p.get("b", 2.0)),
    "coordinate": lambda n, p: truncated_coordinate(n, int(p["j"]), p.get("k", 1.0)),
    "monomial_bump": lambda n, p: monomial_bump(n, p.get("powers", 1), p.get("center", 0.0),
                                                p.get("radius", 1.0)),
    "flattened_bump": lambda n, p: flattened_bump(n, p["theta"], p.get("radius", 1.0)),
}


def from_dict(doc: dict, n: int) -> TestFunction:
    """Build a catalog member from ``{"family": ..., <params>}``."""
    params = dict(doc)
    family = params.pop("family", None)
    if family not in FAMILIES:
        raise ValueError(f"unknown test-function family {family!r}")
    return FAMILIES[family](n, params)


def default_catalog(n: int) -> list[TestFunction]:
    """Functions with non-trivial values and slopes on every face, for identity checks."""
    return [
        bump(n, 0.3, 1.2),
        bump(n, 0.0, 1.5),
        truncated_coordinate(n, 0, 1.0),
        monomial_bump(n, 1, 0.5, 1.0),
        cutoff(n, 0.5, 2.0),
        bump(n, 0.8, 1.0),
    ]
