"""Deterministic integration against the stratified Gibbs measure for n <= 3.

Each face ``E_+(B)`` is integrated with a nested, per-axis adaptive
Gauss-Kronrod (7/15) rule.  One axis is refined for a whole batch of outer
nodes at once so the integrand is always evaluated on arrays; intervals are
split until every row of the batch meets the tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionTooLarge, ToleranceNotMet
from .gibbs import GibbsModel
from .strata import StratumId, enumerate_strata, weights_array

MAX_QUAD_DIMENSION = 3
TAIL_ENERGY_GAP = 40.0  # exp(-40) ~ 4e-18
MIN_TAIL_ENERGY = math.log(1e10)

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes on [-1, 1]
W_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


@dataclass(frozen=True)
class QuadConfig:
    L: float | None = None  # None: derived from the potential's coercivity
    rel_tol: float = 1e-10
    abs_tol: float = 1e-15
    max_subdiv: int = 4000

    def cutoff(self, model: GibbsModel) -> float:
        if self.L is None:
            return model.tail_cutoff(TAIL_ENERGY_GAP)
        if self.L <= 0:
            raise ValueError("tail cutoff must be positive")
        if model.tail_energy(self.L) < MIN_TAIL_ENERGY:
            raise ValueError(f"L={self.L} leaves a tail mass above 1e-10")
        return float(self.L)


def _gk_level(func, upper, knots, prefix, axis, rel_tol, abs_tol, max_subdiv):
    """Integrate axes ``axis..k-1`` for every row of ``prefix``; returns (values, errors)."""
    k = len(upper)
    m = prefix.shape[0]
    if axis == k:
        vals = np.asarray(func(prefix), dtype=float)
        return vals, np.zeros(m), np.abs(vals)

    hi = upper[axis]
    cuts = [0.0] + [t for t in sorted(knots[axis]) if 0.0 < t < hi] + [hi]
    todo = list(zip(cuts[:-1], cuts[1:]))
    done_val = []  # per interval (m,) arrays
    done_err = []
    done_abs = []
    bounds = []
    while True:
        if todo:
            a = np.array([t[0] for t in todo])
            b = np.array([t[1] for t in todo])
            half = 0.5 * (b - a)
            x = (0.5 * (a + b))[:, None] + half[:, None] * NODES[None, :]  # (q, 15)
            q = len(todo)
            pts = np.empty((m, q * 15, axis + 1))
            pts[:, :, :axis] = prefix[:, None, :]
            pts[:, :, axis] = x.reshape(-1)[None, :]
            inner, inner_err, inner_abs = _gk_level(func, upper, knots, pts.reshape(-1, axis + 1),
                                         axis + 1, rel_tol, abs_tol, max_subdiv)
            fv = inner.reshape(m, q, 15)
            fe = inner_err.reshape(m, q, 15)
            kron = half[None, :] * (fv @ W_KRONROD)
            gauss = half[None, :] * (fv @ W_GAUSS)
            err = np.abs(kron - gauss) + half[None, :] * (fe @ W_KRONROD)
            resabs = half[None, :] * (inner_abs.reshape(m, q, 15) @ W_KRONROD)
            for i in range(q):
                done_val.append(kron[:, i])
                done_err.append(err[:, i])
                done_abs.append(resabs[:, i])
                bounds.append(todo[i])
            todo = []
        V = np.stack(done_val, axis=1)  # (m, intervals)
        Er = np.stack(done_err, axis=1)
        total = V.sum(axis=1)
        total_err = Er.sum(axis=1)
        total_abs = np.stack(done_abs, axis=1).sum(axis=1)
        # tolerance relative to int |f| so cancelling rows do not stall refinement
        allowed = np.maximum(abs_tol, rel_tol * total_abs)
        if np.all(total_err <= allowed):
            return total, total_err, total_abs
        if len(bounds) >= max_subdiv:
            raise ToleranceNotMet(
                f"axis {axis}: error {total_err.max():.3g} after {len(bounds)} intervals")
        # split every interval holding more than its share of some row's budget
        share = (Er / allowed[:, None]).max(axis=0) * len(bounds)
        split = np.flatnonzero(share > 1.0)
        if split.size == 0:
            split = np.array([int(np.argmax(share))])
        keep = np.ones(len(bounds), dtype=bool)
        keep[split] = False
        for i in split:
            lo, up = bounds[i]
            mid = 0.5 * (lo + up)
            todo += [(lo, mid), (mid, up)]
        done_val = [v for v, kp in zip(done_val, keep) if kp]
        done_err = [e for e, kp in zip(done_err, keep) if kp]
        done_abs = [a for a, kp in zip(done_abs, keep) if kp]
        bounds = [bd for bd, kp in zip(bounds, keep) if kp]


def integrate_box(func: Callable[[np.ndarray], np.ndarray], upper, knots=None, *,
                  rel_tol: float = 1e-10, abs_tol: float = 1e-15,
                  max_subdiv: int = 4000) -> tuple[float, float]:
    """Integrate ``func`` over ``prod_j [0, upper_j]``.

    ``func`` maps an ``(m, k)`` array of points to ``m`` values.  ``knots`` are
    per-axis breakpoints where the integrand loses smoothness.  The error
    target is ``max(abs_tol, rel_tol * int |func|)``.
    """
    upper = [float(u) for u in upper]
    k = len(upper)
    if knots is None:
        knots = [()] * k
    if k == 0:
        return float(np.asarray(func(np.zeros((1, 0))))[0]), 0.0
    if any(u <= 0 for u in upper):
        return 0.0, 0.0
    val, err, _ = _gk_level(func, upper, [tuple(kn) for kn in knots], np.zeros((1, 0)), 0,
                         rel_tol, abs_tol, max_subdiv)
    return float(val[0]), float(err[0])


def face_integral(model: GibbsModel, integrand, mask: int, cfg: QuadConfig, *,
                  upper=None, knots=None, L: float | None = None) -> float:
    """``s^(n-#B) int_{E_+(B)} integrand * exp(-H)`` over the face ``mask`` (unnormalised).

    ``integrand(X, mask)`` receives full ``(m, n)`` states with zeros off the face.
    """
    n = model.n
    B = StratumId(mask).members()
    L = cfg.cutoff(model) if L is None else L
    up_full = np.full(n, L) if upper is None else np.minimum(np.asarray(upper, float), L)
    kn_full = knots if knots is not None else [()] * n
    weight = model.s ** (n - len(B))

    def on_face(Y):
        X = np.zeros((Y.shape[0], n))
        X[:, list(B)] = Y
        return integrand(X, mask) * np.exp(-model.energy(X))

    val, _ = integrate_box(on_face, [up_full[j] for j in B], [kn_full[j] for j in B],
                           rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_subdiv=cfg.max_subdiv)
    return weight * val


def _check_dim(model: GibbsModel):
    if model.n > MAX_QUAD_DIMENSION:
        raise DimensionTooLarge(f"quadrature supports n <= {MAX_QUAD_DIMENSION}, got {model.n}")


@dataclass(frozen=True)
class StratumMassTable:
    n: int
    s: float
    L: float
    unnormalized: np.ndarray  # indexed by mask

    @property
    def total(self) -> float:
        return float(self.unnormalized.sum())

    @property
    def normalized(self) -> np.ndarray:
        return self.unnormalized / self.unnormalized.sum()

    @property
    def masks(self) -> list[StratumId]:
        return enumerate_strata(self.n)

    @property
    def revuz_masses(self) -> np.ndarray:
        """Normalised masses of ``rho * lambda_B`` without the ``s^(n-#B)`` weight."""
        return self.normalized / weights_array(self.n, self.s)

    def to_csv(self) -> str:
        lines = ["mask,unnormalized,normalized"]
        for m, u, p in zip(self.masks, self.unnormalized, self.normalized):
            lines.append(f"{int(m)},{u:.17g},{p:.17g}")
        return "\n".join(lines) + "\n"


def stratum_masses(model: GibbsModel, cfg: QuadConfig = QuadConfig()) -> StratumMassTable:
    """Per-face masses ``s^(n-#B) int exp(-H)`` and their normalisation."""
    _check_dim(model)
    L = cfg.cutoff(model)
    one = lambda X, mask: np.ones(X.shape[0])
    masses = np.array([face_integral(model, one, m, cfg, L=L) for m in range(1 << model.n)])
    return StratumMassTable(model.n, model.s, L, masses)


def partition_function(model: GibbsModel, cfg: QuadConfig = QuadConfig()) -> float:
    return stratum_masses(model, cfg).total


def _support_info(f, n):
    upper = getattr(f, "support", None)
    knots = getattr(f, "knots", None)
    return (None if upper is None else np.asarray(upper, float)), knots


def mu_expectation(model: GibbsModel, f, cfg: QuadConfig = QuadConfig(), *,
                   Z: float | None = None) -> float:
    """``int f d mu`` for a test function or a vectorised callable on ``(m, n)`` states."""
    _check_dim(model)
    L = cfg.cutoff(model)
    Z = partition_function(model, cfg) if Z is None else Z
    evaluate = f.value if hasattr(f, "value") else f
    integrand = lambda X, mask: np.asarray(evaluate(X), dtype=float)
    upper, knots = _support_info(f, model.n)
    total = sum(face_integral(model, integrand, m, cfg, upper=upper, knots=knots, L=L)
                for m in range(1 << model.n))
    return total / Z
