"""Metropolis-within-Gibbs sampler for the pinned interface measure.

Each site conditional is ``s delta_0(du) + exp(-e_x(u)) du`` on ``[0, inf)``
with ``e_x(u) = sum_{y ~ x} V(u - phi_y)`` (wall neighbours at height 0).
A site visit either proposes a dry/wet flip, pairing the atom with a
half-normal draw, or, when wet, a reflected Gaussian step.  Heights are
continuous; only the dynamics lives on a grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .gibbs import GibbsModel, InterfaceState
from .rng import as_generator

_LOG_HALFNORMAL = math.log(math.sqrt(2.0 / math.pi))


@dataclass(frozen=True)
class SamplerConfig:
    sweeps: int = 1000
    proposal_sigma: float = 0.7
    atom_proposal_prob: float = 0.5

    def __post_init__(self):
        if not (self.proposal_sigma > 0 and math.isfinite(self.proposal_sigma)):
            raise ValueError("proposal_sigma must be positive")
        if not 0 < self.atom_proposal_prob < 1:
            raise ValueError("atom_proposal_prob must lie in (0, 1)")
        if self.sweeps < 0:
            raise ValueError("sweeps must be non-negative")


@numba.njit(cache=True, nogil=True)
def _local_energy(phi, x, u, nbr, a, c):
    e = 0.0
    for k in range(nbr.shape[1]):
        y = nbr[x, k]
        r = u - (phi[y] if y >= 0 else 0.0)
        r2 = r * r
        e += 0.5 * a * r2 + 0.25 * c * r2 * r2
    return e


@numba.njit(cache=True, nogil=True)
def log_halfnormal(u, sigma):
    return _LOG_HALFNORMAL - math.log(sigma) - 0.5 * (u / sigma) ** 2


@numba.njit(cache=True, nogil=True)
def log_accept_wetting(e0, eu, u, s, sigma):
    """Log acceptance of ``0 -> u`` with ``u`` drawn half-normal."""
    return min(0.0, -(eu - e0) - math.log(s) - log_halfnormal(u, sigma))


@numba.njit(cache=True, nogil=True)
def log_accept_drying(e0, eu, u, s, sigma):
    """Log acceptance of ``u -> 0``; the reverse of :func:`log_accept_wetting`."""
    return min(0.0, (eu - e0) + math.log(s) + log_halfnormal(u, sigma))


@numba.njit(cache=True, nogil=True)
def _sweeps(phi, U, Z, nbr, a, c, s, sigma, p_atom, out):
    n = phi.shape[0]
    for t in range(U.shape[0]):
        for x in range(n):
            u = phi[x]
            pick = U[t, x, 0]
            acc = U[t, x, 1]
            if pick < p_atom:
                e0 = _local_energy(phi, x, 0.0, nbr, a, c)
                if u == 0.0:
                    v = sigma * abs(Z[t, x])
                    ev = _local_energy(phi, x, v, nbr, a, c)
                    if v > 0.0 and math.log(acc) < log_accept_wetting(e0, ev, v, s, sigma):
                        phi[x] = v
                else:
                    eu = _local_energy(phi, x, u, nbr, a, c)
                    if math.log(acc) < log_accept_drying(e0, eu, u, s, sigma):
                        phi[x] = 0.0
            elif u > 0.0:
                v = abs(u + sigma * Z[t, x])
                if v > 0.0:
                    eu = _local_energy(phi, x, u, nbr, a, c)
                    ev = _local_energy(phi, x, v, nbr, a, c)
                    if math.log(acc) < -(ev - eu):
                        phi[x] = v
        if out.shape[0] > 0:
            for x in range(n):
                out[t, x] = phi[x]


def _args(model: GibbsModel, cfg: SamplerConfig):
    a, c = model.potential.coeffs
    nbr = np.ascontiguousarray(model.lattice.neighbors, dtype=np.int64)
    return nbr, float(a), float(c), float(model.s), float(cfg.proposal_sigma), \
        float(cfg.atom_proposal_prob)


def _draws(gen, sweeps, n):
    # (sweeps, n, 2) uniforms then (sweeps, n) normals; log(0) guarded by 1 - U
    U = 1.0 - gen.random((sweeps, n, 2))
    Z = gen.standard_normal((sweeps, n))
    return U, Z


def _run(model, cfg, phi, gen, sweeps, record):
    phi = np.array(phi, dtype=float)
    out = np.empty((sweeps if record else 0, model.n))
    chunk = 4096
    done = 0
    args = _args(model, cfg)
    while done < sweeps:
        m = min(chunk, sweeps - done)
        U, Z = _draws(gen, m, model.n)
        _sweeps(phi, U, Z, *args, out[done:done + m] if record else out)
        done += m
    return phi, out


def gibbs_sweep(model: GibbsModel, phi, cfg: SamplerConfig, rng) -> np.ndarray:
    """One systematic-scan sweep over all sites."""
    phi = InterfaceState(phi).heights
    new, _ = _run(model, cfg, phi, as_generator(rng), 1, False)
    return new


def sample_stationary(model: GibbsModel, cfg: SamplerConfig, rng, *,
                      start=None) -> InterfaceState:
    """State after ``cfg.sweeps`` sweeps from ``start`` (default: all dry)."""
    if cfg.sweeps < 100 * model.n:
        raise ValueError(f"need at least {100 * model.n} sweeps of burn-in, got {cfg.sweeps}")
    phi0 = np.zeros(model.n) if start is None else InterfaceState(start).heights
    phi, _ = _run(model, cfg, phi0, as_generator(rng), cfg.sweeps, False)
    return InterfaceState(phi)


def sample_chain(model: GibbsModel, cfg: SamplerConfig, rng, draws: int, *,
                 thin: int = 1, start=None) -> np.ndarray:
    """``draws`` states of one chain after ``cfg.sweeps`` burn-in, every ``thin`` sweeps."""
    if thin < 1:
        raise ValueError("thin must be at least 1")
    gen = as_generator(rng)
    phi0 = np.zeros(model.n) if start is None else InterfaceState(start).heights
    phi, _ = _run(model, cfg, phi0, gen, cfg.sweeps, False)
    _, path = _run(model, cfg, phi, gen, draws * thin, True)
    return path[thin - 1::thin]


def flip_balance(model: GibbsModel, phi, x: int, u: float, cfg: SamplerConfig):
    """Both sides of the dry/wet balance at site ``x``.

    Returns ``(alpha(u->0) pi(u) q(u->0), alpha(0->u) pi(0) q(0->u))`` where
    ``pi`` is the unnormalised mixed conditional and ``q`` the proposal law.
    """
    phi = np.asarray(phi, dtype=float)
    nbr, a, c, s, sigma, p = _args(model, cfg)
    e0 = _local_energy(phi, x, 0.0, nbr, a, c)
    eu = _local_energy(phi, x, u, nbr, a, c)
    lhs = math.exp(log_accept_drying(e0, eu, u, s, sigma)) * math.exp(-eu) * p
    rhs = (math.exp(log_accept_wetting(e0, eu, u, s, sigma)) * s * math.exp(-e0)
           * p * math.exp(log_halfnormal(u, sigma)))
    return lhs, rhs
