"""Estimators with error bars built from replica observers.

Accumulators are sums over replicas (counts, first and second moments) and
merge by addition, so folding replicas in any grouping gives the same
report up to floating-point summation order; the runner always folds in
replica-index order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, InsufficientReplicas
from .strata import StratumId, weights_array

Z95 = 1.959963984540054
MIN_REPLICAS = 30
MIN_INTERIOR_STEPS = 10_000


@dataclass
class Moments:
    """Count, sum and sum of squares of a vector statistic over replicas."""

    count: int = 0
    s1: np.ndarray | float = 0.0
    s2: np.ndarray | float = 0.0

    @classmethod
    def of(cls, x) -> "Moments":
        x = np.asarray(x, dtype=float)
        return cls(1, x.copy(), x * x)

    def __add__(self, other: "Moments") -> "Moments":
        return Moments(self.count + other.count, self.s1 + other.s1, self.s2 + other.s2)

    @property
    def mean(self):
        return self.s1 / self.count

    @property
    def var(self):
        """Unbiased sample variance."""
        if self.count < 2:
            return np.full_like(np.asarray(self.s1, float), np.nan)
        return np.maximum(self.s2 - self.s1 * self.s1 / self.count, 0.0) / (self.count - 1)

    @property
    def stderr(self):
        return np.sqrt(self.var / self.count)

    def ci_halfwidth(self, z: float = Z95):
        return z * self.stderr


# -- occupation -----------------------------------------------------------

@dataclass
class OccupationAccumulator:
    n: int
    s: float
    delta: float
    counts: np.ndarray
    batch_counts: np.ndarray  # summed over replicas
    replica_fractions: Moments
    batch_fractions: Moments  # per-batch fractions pooled over replicas
    wall_steps: np.ndarray  # steps at 0 per coordinate

    @classmethod
    def from_observer(cls, ob) -> "OccupationAccumulator":
        frac = ob.counts / max(ob.counts.sum(), 1)
        bsz = ob.batch_counts.sum(axis=1, keepdims=True)
        bfrac = ob.batch_counts[bsz[:, 0] > 0] / bsz[bsz[:, 0] > 0]
        bm = Moments()
        for row in bfrac:
            bm = bm + Moments.of(row)
        return cls(ob.chain.n, ob.chain.s, ob.chain.delta, ob.counts.copy(),
                   ob.batch_counts.copy(), Moments.of(frac), bm, ob.wall_steps.copy())

    def __add__(self, other):
        return OccupationAccumulator(self.n, self.s, self.delta, self.counts + other.counts,
                                     self.batch_counts + other.batch_counts,
                                     self.replica_fractions + other.replica_fractions,
                                     self.batch_fractions + other.batch_fractions,
                                     self.wall_steps + other.wall_steps)

    @property
    def total_steps(self) -> int:
        return int(self.counts.sum())

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / max(self.total_steps, 1)

    def stderr(self) -> np.ndarray:
        """Replica CLT with two or more replicas, batch means otherwise."""
        R = self.replica_fractions.count
        if R >= 2:
            se = np.sqrt(self.replica_fractions.var / R)
        elif self.batch_fractions.count >= 2:
            se = self.batch_fractions.stderr
        else:
            se = np.full(self.counts.shape, np.inf)
        return np.maximum(se, 0.5 / max(self.total_steps, 1))


def fold(items):
    """Left fold with ``+`` in the given order."""
    items = list(items)
    if not items:
        raise ValueError("nothing to fold")
    acc = items[0]
    for it in items[1:]:
        acc = acc + it
    return acc


@dataclass
class OccupationRow:
    mask: int
    empirical_fraction: float
    target_mass: float
    stderr: float
    z: float
    additive_functional: float  # A_t^B per unit time summed over replicas
    revuz_target: float  # target mass without the s^(n-#B) weight


@dataclass
class OccupationReport:
    rows: list
    total_time: float
    z_threshold: float
    abs_tol: float | None
    passed: bool

    def to_csv(self) -> str:
        lines = ["mask,empirical_fraction,target_mass,stderr,z"]
        for r in self.rows:
            lines.append(f"{r.mask},{r.empirical_fraction:.17g},{r.target_mass:.17g},"
                         f"{r.stderr:.17g},{r.z:.17g}")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "total_time": self.total_time,
            "z_threshold": self.z_threshold,
            "abs_tol": self.abs_tol,
            "passed": self.passed,
            "strata": [vars(r) | {"label": repr(StratumId(r.mask))} for r in self.rows],
        }


def revuz_check(observed, targets, *, z_threshold: float = 3.0,
                abs_tol: float | None = None) -> OccupationReport:
    """Empirical face fractions against target masses.

    ``observed`` is an :class:`OccupationAccumulator` or a plain array of
    masses (an oracle; its standard errors are zero).  Passing needs
    ``|z| < z_threshold`` on every face and, if given, ``|error| <= abs_tol``.
    The additive functional ``A_t^B = time in B / s^(n-#B)`` is reported per
    unit time next to the unweighted target, so the weighting is explicit.
    """
    targets = np.asarray(targets, dtype=float)
    if isinstance(observed, OccupationAccumulator):
        frac = observed.fractions
        se = observed.stderr()
        n, s = observed.n, observed.s
        total_time = observed.total_steps * observed.delta
        if total_time <= 0:
            raise InsufficientData("no elapsed time")
    else:
        frac = np.asarray(observed, dtype=float)
        se = np.zeros_like(frac)
        n = int(round(math.log2(frac.size)))
        s = None
        total_time = math.nan
    if frac.shape != targets.shape:
        raise ValueError("observed and target arrays differ in length")
    w = weights_array(n, s) if s is not None else np.ones_like(frac)
    err = frac - targets
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, err / se, np.where(err == 0, 0.0, np.inf))
    rows = [OccupationRow(m, float(frac[m]), float(targets[m]), float(se[m]), float(z[m]),
                          float(frac[m] / w[m]), float(targets[m] / w[m]))
            for m in range(frac.size)]
    ok = bool(np.all(np.abs(z) < z_threshold))
    if abs_tol is not None:
        ok = ok and bool(np.all(np.abs(err) <= abs_tol))
    return OccupationReport(rows, total_time, z_threshold, abs_tol, ok)


# -- quadratic and cross variation -----------------------------------------

@dataclass
class QVAccumulator:
    delta: float
    interior_steps: np.ndarray
    sum_sq: np.ndarray
    up_moves: np.ndarray
    free_moves: np.ndarray
    pair_steps: np.ndarray
    cross_sum: np.ndarray
    cross_sq: np.ndarray

    @classmethod
    def from_observer(cls, ob) -> "QVAccumulator":
        return cls(ob.chain.delta, ob.interior_steps.copy(), ob.sum_sq.copy(),
                   ob.up_moves.copy(), ob.free_moves.copy(), ob.pair_steps.copy(),
                   ob.cross_sum.copy(), ob.cross_sq.copy())

    def __add__(self, o):
        return QVAccumulator(self.delta, *(getattr(self, k) + getattr(o, k) for k in (
            "interior_steps", "sum_sq", "up_moves", "free_moves", "pair_steps",
            "cross_sum", "cross_sq")))


@dataclass
class QVReport:
    slope: list
    cross: list  # per pair (j, k, density, stderr, z)
    up_fraction: list
    slope_band: tuple
    z_threshold: float
    passed: bool

    def to_dict(self) -> dict:
        return {"slope": self.slope, "slope_band": list(self.slope_band),
                "cross": [dict(zip(("j", "k", "value", "stderr", "z"), c)) for c in self.cross],
                "up_fraction_interior": self.up_fraction, "z_threshold": self.z_threshold,
                "passed": self.passed}


def qv_check(acc: QVAccumulator, *, slope_band=(1.9, 2.1), z_threshold: float = 3.0,
             min_steps: int = MIN_INTERIOR_STEPS) -> QVReport:
    """Interior quadratic-variation density per coordinate and cross terms.

    ``slope_j = sum (dX_j)^2 / (interior time of j)``; the cross term for
    ``j != k`` is ``sum c_j c_k / (joint interior time)`` on compensated
    increments, with standard error from ``sum (c_j c_k)^2``.
    """
    if np.any(acc.interior_steps < min_steps):
        raise InsufficientData(f"interior steps {acc.interior_steps.tolist()} below {min_steps}")
    slope = acc.sum_sq / (acc.interior_steps * acc.delta)
    n = slope.size
    cross = []
    for j in range(n):
        for k in range(j + 1, n):
            t = acc.pair_steps[j, k] * acc.delta
            if t == 0:
                cross.append((j, k, 0.0, math.inf, 0.0))
                continue
            val = acc.cross_sum[j, k] / t
            se = math.sqrt(acc.cross_sq[j, k]) / t
            cross.append((j, k, float(val), float(se), float(val / se) if se > 0 else 0.0))
    up = (acc.up_moves / np.maximum(acc.free_moves, 1)).tolist()
    ok = bool(np.all((slope >= slope_band[0]) & (slope <= slope_band[1])))
    ok = ok and all(abs(c[4]) < z_threshold for c in cross)
    return QVReport(slope.tolist(), cross, up, tuple(slope_band), z_threshold, ok)


# -- martingale, invariance, symmetry ---------------------------------------

@dataclass
class PathFunctionals:
    """Per-replica test-function statistics, as moments over replicas.

    For functions ``f_i``: the residual with and without the wall term, the
    increment ``f_i(X_T) - f_i(X_0)``, and for ``i < j`` the antisymmetric
    product ``f_i(X_0) f_j(X_T) - f_j(X_0) f_i(X_T)``.
    """

    names: list
    residual: Moments
    residual_no_wall: Moments
    increment: Moments
    antisym: Moments
    wall_term: Moments

    @classmethod
    def from_observer(cls, ob) -> "PathFunctionals":
        f0, fT = ob.f0, ob.fT
        iu = np.triu_indices(f0.size, 1)
        anti = (np.outer(f0, fT) - np.outer(fT, f0))[iu]
        return cls([f.name for f in ob.functions], Moments.of(ob.residual(True)),
                   Moments.of(ob.residual(False)), Moments.of(fT - f0), Moments.of(anti),
                   Moments.of(ob.int_wall))

    def __add__(self, o):
        return PathFunctionals(self.names, self.residual + o.residual,
                               self.residual_no_wall + o.residual_no_wall,
                               self.increment + o.increment, self.antisym + o.antisym,
                               self.wall_term + o.wall_term)

    @property
    def replicas(self) -> int:
        return self.residual.count

    def pairs(self):
        m = len(self.names)
        return [(i, j) for i in range(m) for j in range(i + 1, m)]


@dataclass
class CIRow:
    name: str
    mean: float
    halfwidth: float

    @property
    def contains_zero(self) -> bool:
        return abs(self.mean) <= self.halfwidth


@dataclass
class MartingaleReport:
    rows: list
    without_wall: list
    replicas: int
    passed: bool
    control_failed: bool  # dropping the wall term breaks the check

    def to_dict(self) -> dict:
        conv = lambda rs: [vars(r) | {"contains_zero": r.contains_zero} for r in rs]
        return {"replicas": self.replicas, "functions": conv(self.rows),
                "without_wall_term": conv(self.without_wall), "passed": self.passed,
                "negative_control_detected": self.control_failed}


def _need(acc: PathFunctionals):
    if acc.replicas < MIN_REPLICAS:
        raise InsufficientReplicas(f"{acc.replicas} replicas, need {MIN_REPLICAS}")


def _rows(names, mom: Moments):
    mean, hw = np.atleast_1d(mom.mean), np.atleast_1d(mom.ci_halfwidth())
    return [CIRow(nm, float(m), float(w)) for nm, m, w in zip(names, mean, hw)]


def martingale_residual(acc: PathFunctionals) -> MartingaleReport:
    """95% CIs of ``E[f(X_T) - f(X_0) - int A f]`` with and without the wall term."""
    _need(acc)
    rows = _rows(acc.names, acc.residual)
    bare = _rows(acc.names, acc.residual_no_wall)
    return MartingaleReport(rows, bare, acc.replicas, all(r.contains_zero for r in rows),
                            any(not r.contains_zero for r in bare))


@dataclass
class SymmetryReport:
    invariance: list  # CIRow per function, E[f(X_T) - f(X_0)]
    symmetry: list  # CIRow per pair, E[f(X_0) g(X_T) - g(X_0) f(X_T)]
    replicas: int
    passed: bool

    def to_dict(self) -> dict:
        conv = lambda rs: [vars(r) | {"contains_zero": r.contains_zero} for r in rs]
        return {"replicas": self.replicas, "invariance": conv(self.invariance),
                "symmetry": conv(self.symmetry), "passed": self.passed}


def symmetry_check(acc: PathFunctionals) -> SymmetryReport:
    """Invariance of ``mu`` and time-reversal symmetry over a stationary-start ensemble."""
    _need(acc)
    inv = _rows(acc.names, acc.increment)
    pair_names = [f"{acc.names[i]}|{acc.names[j]}" for i, j in acc.pairs()]
    sym = _rows(pair_names, acc.antisym) if pair_names else []
    ok = all(r.contains_zero for r in inv + sym)
    return SymmetryReport(inv, sym, acc.replicas, ok)


# -- bookkeeping ------------------------------------------------------------

@dataclass
class ConservativityReport:
    k_min: int
    k_max: int
    cap: int
    steps: int
    occupation_steps: int
    time: float
    passed: bool

    def to_dict(self) -> dict:
        return dict(vars(self))


def conservativity(results, occupation: OccupationAccumulator | None = None) -> ConservativityReport:
    """All visited states inside ``[0, L]^n`` and no steps lost."""
    results = list(results)
    k_min = min(r.k_min for r in results)
    k_max = max(r.k_max for r in results)
    cap = results[0].chain.K
    steps = sum(r.steps for r in results)
    occ = occupation.total_steps if occupation is not None else steps
    time = steps * results[0].chain.delta
    ok = k_min >= 0 and k_max <= cap and occ == steps
    return ConservativityReport(k_min, k_max, cap, steps, occ, time, ok)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p, float) - np.asarray(q, float)).sum())


def binomial_z(successes: int, trials: int, p: float = 0.5) -> float:
    if trials == 0:
        return 0.0
    return (successes - trials * p) / math.sqrt(trials * p * (1 - p))


def batch_means_stderr(x, batches: int = 20) -> float:
    """Batch-means standard error of the mean of a stationary sequence."""
    x = np.asarray(x, dtype=float)
    m = len(x) // batches
    if batches < 2 or m < 1:
        raise InsufficientData("need at least two non-empty batches")
    means = x[: m * batches].reshape(batches, m).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))
