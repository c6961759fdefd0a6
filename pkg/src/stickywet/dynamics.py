"""Sticky birth-death chain on the height grid and its exact stationary law.

States are integer grid indices ``k`` with heights ``k * h``; ``k = 0`` is
contact with the wall.  Every step updates all coordinates synchronously
from the pre-move state, one uniform draw per coordinate:

* ``0 < k < K``: up with probability ``(1 + h b_j / 2) / 2``, else down
  (a down move from ``k = 1`` lands on the wall);
* ``k = 0``: up with probability ``q = h / (2 s)``, else stay;
* ``k = K = L / h``: forced down.

With ``delta = h^2 / 2`` the interior moves have mean ``b_j delta`` and
variance ``2 delta``, and the wall releases at rate ``1 / (s h)``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapTooSmall, NotConverged, StateSpaceTooLarge, StepTooLarge
from .gibbs import GibbsModel
from .rng import as_generator
from .strata import weights_array

TAIL_TOL = 1e-6
MAX_ORACLE_STATES = 200_000
BLOCK_STEPS = 1 << 15
_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class ChainSpec:
    model: GibbsModel
    h: float
    L: float
    zero_drift: bool = False
    K: int = field(init=False)  # grid index of the cap

    def __post_init__(self):
        object.__setattr__(self, "K", int(round(self.L / self.h)))

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def s(self) -> float:
        return self.model.s

    @property
    def delta(self) -> float:
        return 0.5 * self.h * self.h

    @property
    def q(self) -> float:
        return self.h / (2.0 * self.s)

    @property
    def grid(self) -> np.ndarray:
        return self.h * np.arange(self.K + 1)

    @property
    def n_states(self) -> int:
        return (self.K + 1) ** self.n

    def drift(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        return np.zeros_like(phi) if self.zero_drift else self.model.drift(phi)

    def steps_for(self, T: float) -> int:
        K = T / self.delta
        k = int(round(K))
        if abs(K - k) > 1e-9 * max(1.0, K):
            raise ValueError(f"T={T} is not a multiple of the time step {self.delta}")
        return k

    def to_grid(self, phi) -> np.ndarray:
        """Grid indices of heights that already lie on the grid."""
        phi = np.asarray(phi, dtype=float)
        k = np.rint(phi / self.h)
        if np.any(np.abs(k * self.h - phi) > _GRID_RTOL * max(1.0, self.L)) or np.any(k < 0) \
                or np.any(k > self.K):
            raise ValueError("state is not on the chain grid")
        return k.astype(np.int64)

    def snap(self, phi) -> np.ndarray:
        """Nearest grid indices; wet heights never snap onto the wall."""
        phi = np.asarray(phi, dtype=float)
        k = np.clip(np.rint(phi / self.h), 0, self.K).astype(np.int64)
        return np.where((phi > 0) & (k == 0), 1, k)


def build_chain(model: GibbsModel, h: float, L: float, *, zero_drift: bool = False,
                tail_tol: float | None = TAIL_TOL) -> ChainSpec:
    """Validate the step and cap and return the chain.

    ``StepTooLarge`` if ``q > 1`` or ``h max|b| / 2 >= 1`` on ``[0, L]^n``;
    ``CapTooSmall`` if the estimated mass of ``mu`` above ``L`` exceeds
    ``tail_tol`` (``None`` skips the tail check).
    """
    if not (h > 0 and math.isfinite(h)):
        raise StepTooLarge(f"step must be positive and finite, got {h}")
    if not (L > 0 and math.isfinite(L)):
        raise CapTooSmall(f"cap must be positive and finite, got {L}")
    K = L / h
    if abs(K - round(K)) > 1e-9 * max(1.0, K) or round(K) < 1:
        raise ValueError(f"L={L} must be a positive multiple of h={h}")
    q = h / (2.0 * model.s)
    if q > 1:
        raise StepTooLarge(f"wall release probability h/(2s)={q:g} exceeds 1")
    bias = 0.0 if zero_drift else h * model.drift_bound(L) / 2
    if bias >= 1:
        raise StepTooLarge(f"drift bias h*max|b|/2={bias:g} is not below 1")
    if tail_tol is not None and not zero_drift:
        tail = math.exp(-model.tail_energy(L))
        if tail > tail_tol:
            raise CapTooSmall(f"tail mass estimate {tail:.3g} above L={L} exceeds {tail_tol:g}")
    return ChainSpec(model, float(h), float(L), zero_drift)


@numba.njit(cache=True, nogil=True)
def _run_block(k, U, out, K, q, h, zero_drift, nbr, a, c):
    n = k.shape[0]
    deg = nbr.shape[1]
    b = np.zeros(n)
    for t in range(U.shape[0]):
        if not zero_drift:
            for j in range(n):
                x = k[j] * h
                acc = 0.0
                for e in range(deg):
                    y = nbr[j, e]
                    r = x - (k[y] * h if y >= 0 else 0.0)
                    acc += a * r + c * r * r * r
                b[j] = -acc
        for j in range(n):
            kj = k[j]
            u = U[t, j]
            if kj == 0:
                if u < q:
                    k[j] = 1
            elif kj == K:
                k[j] = K - 1
            elif u < 0.5 * (1.0 + 0.5 * h * b[j]):
                k[j] = kj + 1
            else:
                k[j] = kj - 1
        for j in range(n):
            out[t, j] = k[j]


def _kernel_args(chain: ChainSpec):
    a, c = chain.model.potential.coeffs
    nbr = np.ascontiguousarray(chain.model.lattice.neighbors, dtype=np.int64)
    return chain.K, chain.q, chain.h, bool(chain.zero_drift), nbr, float(a), float(c)


def step(chain: ChainSpec, phi, rng) -> np.ndarray:
    """One synchronous update of every coordinate; returns new heights."""
    k = chain.to_grid(phi).copy()
    U = as_generator(rng).random((1, chain.n))
    out = np.empty((1, chain.n), dtype=np.int64)
    _run_block(k, U, out, *_kernel_args(chain))
    return out[0] * chain.h


@dataclass
class Block:
    """Grid path segment handed to observers.

    ``k`` has shape ``(m + 1, n)``: row 0 is the state before the segment,
    rows ``1..m`` the states after each step.  ``t0`` is the index of row 0.
    """

    chain: ChainSpec
    k: np.ndarray
    t0: int
    _drift: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return self.k.shape[0] - 1

    @property
    def heights(self) -> np.ndarray:
        return self.k * self.chain.h

    @property
    def pre(self) -> np.ndarray:
        return self.heights[:-1]

    @property
    def post(self) -> np.ndarray:
        return self.heights[1:]

    @property
    def drift(self) -> np.ndarray:
        """Drift at the pre-move states (what the kernel used)."""
        if self._drift is None:
            self._drift = self.chain.drift(self.pre)
        return self._drift


@dataclass
class RunResult:
    chain: ChainSpec
    initial: np.ndarray
    final: np.ndarray
    steps: int
    k_min: int
    k_max: int
    observers: list

    @property
    def time(self) -> float:
        return self.steps * self.chain.delta

    def __eq__(self, other):
        return (isinstance(other, RunResult) and self.steps == other.steps
                and np.array_equal(self.initial, other.initial)
                and np.array_equal(self.final, other.final)
                and [o.state() for o in self.observers] == [o.state() for o in other.observers])


def simulate(chain: ChainSpec, phi0, *, T: float | None = None, steps: int | None = None,
             observers=(), rng=None, block_steps: int = BLOCK_STEPS) -> RunResult:
    """Run ``K = T / delta`` steps from the grid state ``phi0``.

    Uniforms are drawn in blocks of ``block_steps`` rows of ``n`` values; a
    Generator yields the same sequence for any block size, so the path depends
    on ``(chain, phi0, rng)`` only.
    """
    if (T is None) == (steps is None):
        raise ValueError("give exactly one of T or steps")
    K = chain.steps_for(T) if steps is None else int(steps)
    if K < 0:
        raise ValueError("horizon must be non-negative")
    gen = as_generator(rng)
    k = chain.to_grid(phi0).copy()
    initial = k.copy()
    for ob in observers:
        ob.start(chain, k * chain.h, K)
    args = _kernel_args(chain)
    k_min, k_max = int(k.min()), int(k.max())
    done = 0
    while done < K:
        m = min(block_steps, K - done)
        U = gen.random((m, chain.n))
        path = np.empty((m + 1, chain.n), dtype=np.int64)
        path[0] = k
        _run_block(k, U, path[1:], *args)
        k_min = min(k_min, int(path.min()))
        k_max = max(k_max, int(path.max()))
        blk = Block(chain, path, done)
        for ob in observers:
            ob.update(blk)
        done += m
    for ob in observers:
        ob.finish(k * chain.h)
    return RunResult(chain, initial * chain.h, k * chain.h, K, k_min, k_max, list(observers))


# -- exact stationary law ---------------------------------------------------

@dataclass(frozen=True)
class ChainOracle:
    chain: ChainSpec
    pi: np.ndarray  # over flattened grid states, C order of (K+1,)*n
    iterations: int
    tv_increment: float

    def pi_grid(self) -> np.ndarray:
        return self.pi.reshape((self.chain.K + 1,) * self.chain.n)

    @property
    def stratum_masses(self) -> np.ndarray:
        """Stationary mass of each face, indexed by mask."""
        n = self.chain.n
        wet = (_state_indices(self.chain) > 0)
        masks = (wet * (1 << np.arange(n))).sum(axis=1)
        return np.bincount(masks, weights=self.pi, minlength=1 << n)

    @property
    def revuz_masses(self) -> np.ndarray:
        return self.stratum_masses / weights_array(self.chain.n, self.chain.s)


def _state_indices(chain: ChainSpec) -> np.ndarray:
    return np.indices((chain.K + 1,) * chain.n).reshape(chain.n, -1).T


def transition_matrix(chain: ChainSpec) -> sp.csr_matrix:
    """Sparse one-step matrix of the synchronous chain (rows sum to 1)."""
    n, K = chain.n, chain.K
    ks = _state_indices(chain)
    S = ks.shape[0]
    b = chain.drift(ks * chain.h)
    p_up = np.where(ks == 0, chain.q,
                    np.where(ks == K, 0.0, 0.5 * (1.0 + 0.5 * chain.h * b)))
    # moves per coordinate: wall stays put on "down", cap has only "down"
    up_k = np.minimum(ks + 1, K)
    down_k = np.maximum(ks - 1, 0)
    strides = (K + 1) ** np.arange(n - 1, -1, -1)
    rows, cols, vals = [], [], []
    for combo in range(1 << n):
        ups = np.array([(combo >> j) & 1 for j in range(n)], dtype=bool)
        prob = np.prod(np.where(ups, p_up, 1.0 - p_up), axis=1)
        target = np.where(ups, up_k, down_k) @ strides
        keep = prob > 0
        rows.append(np.flatnonzero(keep))
        cols.append(target[keep])
        vals.append(prob[keep])
    P = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(S, S))
    P.sum_duplicates()
    return P


def chain_stationary_oracle(chain: ChainSpec, *, tol: float = 1e-12,
                            max_iter: int = 200_000) -> ChainOracle:
    """Stationary distribution of the exact chain.

    A direct sparse solve provides the starting vector; power iteration then
    runs until the total-variation change of one step is below ``tol``.
    """
    S = chain.n_states
    if S > MAX_ORACLE_STATES:
        raise StateSpaceTooLarge(f"{S} grid states exceed {MAX_ORACLE_STATES}")
    P = transition_matrix(chain)
    PT = P.T.tocsr()
    A = (PT - sp.identity(S, format="csr")).tolil()
    A[0, :] = np.ones(S)
    rhs = np.zeros(S)
    rhs[0] = 1.0
    pi = spla.spsolve(A.tocsc(), rhs)
    if not np.all(np.isfinite(pi)):
        pi = np.full(S, 1.0 / S)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    tv = math.inf
    for it in range(1, max_iter + 1):
        nxt = PT @ pi
        nxt /= nxt.sum()
        tv = 0.5 * np.abs(nxt - pi).sum()
        pi = nxt
        if tv < tol:
            return ChainOracle(chain, pi, it, float(tv))
    raise NotConverged(f"power iteration stalled at TV increment {tv:.3g}")


# -- trajectory dump ----------------------------------------------------------

DUMP_MAGIC = b"STKY"
DUMP_VERSION = 1
_HEADER = struct.Struct("<4sIQdd")


class TrajectoryWriter:
    """Observer streaming post-step heights to a little-endian binary file."""

    def __init__(self, path):
        self.path = path
        self._fh = None
        self.frames = 0

    def start(self, chain, phi0, K):
        self._fh = open(self.path, "wb")
        self._fh.write(_HEADER.pack(DUMP_MAGIC, DUMP_VERSION, chain.n, chain.h, chain.delta))

    def update(self, blk: Block):
        self._fh.write(np.ascontiguousarray(blk.post, dtype="<f8").tobytes())
        self.frames += blk.steps

    def finish(self, phi):
        self._fh.close()

    def state(self):
        return (str(self.path), self.frames)


def read_trajectory(path):
    """Return ``(header dict, frames (K, n))`` from a dump file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    magic, version, n, h, delta = _HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC or version != DUMP_VERSION:
        raise ValueError("not a trajectory dump")
    frames = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(-1, n)
    return {"n": n, "h": h, "delta": delta, "version": version}, frames
