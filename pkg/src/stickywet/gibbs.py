"""Lattice wetting model: box lattice, pair potential, Hamiltonian and drift.

Heights live on ``D = {1..N}^d`` and are pinned to zero on the outer layer of
the closure ``{0..N+1}^d``.  The energy sums ``V(phi_x - phi_y)`` over ordered
nearest-neighbour pairs of the closure with a factor 1/2, so every undirected
bond is counted once.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DimensionTooLarge,
    InvalidStickiness,
    KappaDiverges,
    NotC1,
    NotSymmetric,
    UnknownSite,
)
from .strata import MAX_DIMENSION, StratumId, masks_of, validate_heights


@dataclass(frozen=True, eq=False)
class LatticeSpec:
    d: int
    N: int
    sites: np.ndarray  # (n, d) lattice coordinates, 1-based, row-major order
    neighbors: np.ndarray  # (n, 2d) linear index of each neighbour, -1 on the boundary
    boundary: tuple  # closure points outside D
    boundary_pairs: int  # ordered boundary-boundary pairs at distance 1

    @property
    def n(self) -> int:
        return self.sites.shape[0]

    def index_of(self, x) -> int:
        """Linear (0-based) index of a site given as an index or a coordinate tuple."""
        if isinstance(x, (int, np.integer)):
            if 0 <= x < self.n:
                return int(x)
            raise UnknownSite(f"site index {x} outside 0..{self.n - 1}")
        coords = tuple(int(c) for c in x)
        if len(coords) != self.d or not all(1 <= c <= self.N for c in coords):
            raise UnknownSite(f"site {coords} not in D_{{{self.d},{self.N}}}")
        idx = 0
        for c in coords:
            idx = idx * self.N + (c - 1)
        return idx

    def boundary_distances(self) -> np.ndarray:
        """Per site and axis, distances ``(x_k, N + 1 - x_k)`` to the two zero walls."""
        return np.stack([self.sites, self.N + 1 - self.sites], axis=-1)


def build_lattice(d: int, N: int) -> LatticeSpec:
    if d < 1 or N < 1:
        raise ValueError("lattice needs d >= 1 and N >= 1")
    if N**d > MAX_DIMENSION:
        raise DimensionTooLarge(f"N^d = {N**d} exceeds cap {MAX_DIMENSION}")
    sites = np.array(list(itertools.product(range(1, N + 1), repeat=d)), dtype=np.int64)
    n = sites.shape[0]
    lookup = {tuple(x): i for i, x in enumerate(sites.tolist())}
    neighbors = np.full((n, 2 * d), -1, dtype=np.int64)
    for i, x in enumerate(sites.tolist()):
        for k in range(d):
            for side, step in enumerate((-1, 1)):
                y = list(x)
                y[k] += step
                neighbors[i, 2 * k + side] = lookup.get(tuple(y), -1)
    closure = itertools.product(range(N + 2), repeat=d)
    boundary = tuple(p for p in closure if p not in lookup)
    bset = set(boundary)
    boundary_pairs = 0
    for p in boundary:
        for k in range(d):
            for step in (-1, 1):
                y = list(p)
                y[k] += step
                if tuple(y) in bset:
                    boundary_pairs += 1
    return LatticeSpec(d, N, sites, neighbors, boundary, boundary_pairs)


@dataclass(frozen=True)
class PotentialSpec:
    """Even polynomial pair potential ``V(r) = a r^2/2 + c r^4/4``."""

    family: str
    a: float
    c: float = 0.0

    def __post_init__(self):
        if self.family not in ("gaussian", "quartic"):
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "gaussian" and self.c != 0.0:
            raise ValueError("gaussian potential has no quartic coefficient")

    @classmethod
    def gaussian(cls, a: float = 1.0) -> "PotentialSpec":
        return cls("gaussian", float(a), 0.0)

    @classmethod
    def quartic(cls, a: float, c: float) -> "PotentialSpec":
        return cls("quartic", float(a), float(c))

    @classmethod
    def from_dict(cls, doc: dict) -> "PotentialSpec":
        doc = dict(doc)
        family = doc.pop("family", None)
        allowed = {"gaussian": {"a"}, "quartic": {"a", "c"}}.get(family)
        if allowed is None:
            raise ValueError(f"unknown potential family {family!r}")
        extra = set(doc) - allowed
        if extra:
            raise ValueError(f"unknown potential keys {sorted(extra)}")
        if family == "gaussian":
            return cls.gaussian(doc.get("a", 1.0))
        return cls.quartic(doc.get("a", 0.0), doc.get("c", 1.0))

    def to_dict(self) -> dict:
        if self.family == "gaussian":
            return {"family": "gaussian", "a": self.a}
        return {"family": "quartic", "a": self.a, "c": self.c}

    @property
    def coeffs(self) -> tuple[float, float]:
        return self.a, self.c

    def V(self, r):
        r = np.asarray(r, dtype=float)
        r2 = r * r
        return 0.5 * self.a * r2 + 0.25 * self.c * r2 * r2

    def dV(self, r):
        r = np.asarray(r, dtype=float)
        return self.a * r + self.c * r * r * r

    def d2V(self, r):
        r = np.asarray(r, dtype=float)
        return self.a + 3.0 * self.c * r * r

    @property
    def V_min(self) -> float:
        if self.c > 0 and self.a < 0:
            return -self.a * self.a / (4.0 * self.c)
        return 0.0

    def max_abs_dV(self, R: float) -> float:
        """``max |V'(r)|`` over ``|r| <= R``."""
        cands = [R]
        if self.c > 0 and self.a < 0:
            rc = math.sqrt(-self.a / (3.0 * self.c))
            if rc < R:
                cands.append(rc)
        return float(max(abs(self.dV(r)) for r in cands))

    def kappa(self) -> float:
        return validate_potential(self)


@dataclass(frozen=True)
class CustomPotential:
    """User-supplied potential; only usable through :func:`validate_potential`."""

    V: Callable[[float], float]
    dV: Callable[[float], float] | None = None


def validate_potential(p, *, rel_tol: float = 1e-8) -> float:
    """Check symmetry, C^1 regularity and integrability; return ``kappa``.

    ``kappa = int_R exp(-V(r)) dr`` is computed by adaptive quadrature.
    """
    if isinstance(p, PotentialSpec):
        if p.c < 0 or (p.c == 0 and p.a <= 0):
            raise KappaDiverges(f"{p.family} potential with a={p.a}, c={p.c} is not confining")
        if p.c == 0:  # gaussian integral in closed form
            return math.sqrt(2.0 * math.pi / p.a)
        V = lambda r: float(p.V(r))
    else:
        V = p.V if isinstance(p, CustomPotential) else p
        probe = np.linspace(-5.0, 5.0, 41)
        for r in probe:
            if not math.isclose(V(r), V(-r), rel_tol=1e-10, abs_tol=1e-12):
                raise NotSymmetric(f"V({r}) != V({-r})")
        _check_c1(V, np.concatenate([probe, [0.0]]))
        # integrability heuristic: r^1.5 exp(-V(r)) must decrease far out
        tail = []
        for r in (1e2, 1e3, 1e4):
            try:
                tail.append(1.5 * math.log(r) - V(r))
            except OverflowError:
                tail.append(-math.inf)
        if not (tail[0] > tail[1] > tail[2] or tail[2] == -math.inf):
            raise KappaDiverges("exp(-V) does not decay fast enough at infinity")
    def weight(r):
        try:
            return math.exp(-V(r))
        except OverflowError:  # V itself overflowed: exp(-V) underflows to 0
            return 0.0

    val, err = integrate.quad(weight, 0.0, np.inf,
                              epsabs=0.0, epsrel=rel_tol, limit=200)
    if not np.isfinite(val) or err > 10 * rel_tol * abs(val):
        raise KappaDiverges("kappa quadrature did not converge")
    return 2.0 * val


def _check_c1(V, points, eps: float = 1e-6):
    """Compare one-sided difference quotients; a kink shows up as a jump."""
    for r in points:
        left = (V(r) - V(r - eps)) / eps
        right = (V(r + eps) - V(r)) / eps
        scale = 1.0 + abs(left) + abs(right)
        if abs(right - left) > 1e-3 * scale:
            raise NotC1(f"V is not differentiable near r={r}")


@dataclass(frozen=True)
class InterfaceState:
    heights: np.ndarray

    def __post_init__(self):
        h = validate_heights(self.heights)
        object.__setattr__(self, "heights", h)

    @property
    def n(self) -> int:
        return self.heights.size

    @property
    def dry(self) -> tuple[int, ...]:
        return tuple(np.flatnonzero(self.heights == 0))

    @property
    def wet(self) -> tuple[int, ...]:
        return tuple(np.flatnonzero(self.heights > 0))

    @property
    def stratum(self) -> StratumId:
        return StratumId(int(masks_of(self.heights[None, :])[0]))


@dataclass(frozen=True, eq=False)
class GibbsModel:
    lattice: LatticeSpec
    potential: PotentialSpec
    s: float
    logZ: float | None = None
    _edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.s > 0) or not np.isfinite(self.s):
            raise InvalidStickiness(f"stickiness must be in (0, inf), got {self.s}")
        if not isinstance(self.potential, PotentialSpec):
            raise TypeError("GibbsModel needs a built-in PotentialSpec family")
        validate_potential(self.potential)
        nb = self.lattice.neighbors
        inner = [(i, int(j)) for i in range(nb.shape[0]) for j in nb[i] if j > i]
        wall = np.array([(nb[i] < 0).sum() for i in range(nb.shape[0])], dtype=float)
        ii = np.array([e[0] for e in inner], dtype=np.int64)
        jj = np.array([e[1] for e in inner], dtype=np.int64)
        object.__setattr__(self, "_edges", (ii, jj, wall))

    @classmethod
    def build(cls, d: int, N: int, potential, s: float) -> "GibbsModel":
        if isinstance(potential, dict):
            potential = PotentialSpec.from_dict(potential)
        return cls(build_lattice(d, N), potential, float(s))

    @property
    def n(self) -> int:
        return self.lattice.n

    def with_logZ(self, logZ: float) -> "GibbsModel":
        return GibbsModel(self.lattice, self.potential, self.s, float(logZ))

    # -- energies -----------------------------------------------------------
    def energy(self, phi) -> np.ndarray:
        """Vectorised Hamiltonian over the last axis of ``phi``."""
        phi = np.asarray(phi, dtype=float)
        ii, jj, wall = self._edges
        V = self.potential.V
        H = V(phi[..., ii] - phi[..., jj]).sum(axis=-1) if ii.size else 0.0
        H = H + (wall * V(phi)).sum(axis=-1)
        if self.lattice.boundary_pairs:
            H = H + 0.5 * self.lattice.boundary_pairs * float(V(0.0))
        return H

    def interaction_gradient(self, phi) -> np.ndarray:
        """``V'(x, phi) = sum_{y ~ x} V'(phi_x - phi_y)`` for every site at once."""
        phi = np.asarray(phi, dtype=float)
        nb = self.lattice.neighbors
        padded = np.concatenate([phi, np.zeros(phi.shape[:-1] + (1,))], axis=-1)
        diffs = phi[..., :, None] - padded[..., nb]  # index -1 picks the zero pad
        return self.potential.dV(diffs).sum(axis=-1)

    def drift(self, phi) -> np.ndarray:
        """``b = grad ln rho = -V'(., phi)``."""
        return -self.interaction_gradient(phi)

    def density_unnormalized(self, phi) -> np.ndarray:
        return np.exp(-self.energy(phi))

    def drift_bound(self, L: float) -> float:
        """Upper bound of ``|b_j|`` on ``[0, L]^n``: each bond contributes at most ``max|V'|``."""
        return 2 * self.lattice.d * self.potential.max_abs_dV(L)

    def tail_energy(self, L: float) -> float:
        """Lower estimate of the energy cost of lifting one site to height ``L``.

        Along each axis a site is joined to the two zero walls by disjoint paths
        of lengths ``l1`` and ``l2``; for convex ``V`` Jensen's inequality gives
        ``l1 V(L/l1) + l2 V(L/l2)`` above the ground-state cost of those bonds.
        """
        dist = self.lattice.boundary_distances().astype(float)  # (n, d, 2)
        pot = self.potential
        cost = (dist * pot.V(L / dist)).sum(axis=-1) - dist.sum(axis=-1) * pot.V_min
        return float(cost.max(axis=1).min())

    def tail_cutoff(self, energy_gap: float = 40.0) -> float:
        """Height ``L`` at which :meth:`tail_energy` reaches ``energy_gap``."""
        f = lambda L: self.tail_energy(L) - energy_gap
        hi = 1.0
        while f(hi) < 0:
            hi *= 2.0
        return float(optimize.brentq(f, 0.0, hi, xtol=1e-12))


def hamiltonian(model: GibbsModel, phi) -> float:
    phi = validate_heights(phi)
    return float(model.energy(phi))


def grad_interaction(model: GibbsModel, phi, x) -> float:
    phi = validate_heights(phi)
    i = model.lattice.index_of(x)
    return float(model.interaction_gradient(phi)[i])
