"""Replica-local path accumulators fed block by block from :func:`simulate`.

Time integrals use the left endpoint: step ``t`` contributes the pre-move
state ``X_t`` for a duration ``delta``, matching the explicit scheme.
"""
from __future__ import annotations

import numpy as np

from .dynamics import Block


class Observer:
    def start(self, chain, phi0, K):
        self.chain = chain
        self.K = K

    def update(self, blk: Block):
        raise NotImplementedError

    def finish(self, phi):
        pass

    def state(self):
        """Hashable snapshot used for determinism checks."""
        return tuple(np.asarray(v).tobytes() for v in vars(self).values()
                     if isinstance(v, np.ndarray))


def _masks(k: np.ndarray) -> np.ndarray:
    return ((k > 0) * (1 << np.arange(k.shape[1]))).sum(axis=1)


class OccupationObserver(Observer):
    """Steps spent in each face, overall and per batch, plus wall-hold steps per coordinate."""

    def __init__(self, batches: int = 20):
        if batches < 1:
            raise ValueError("need at least one batch")
        self.batches = batches

    def start(self, chain, phi0, K):
        super().start(chain, phi0, K)
        M = 1 << chain.n
        self.counts = np.zeros(M, dtype=np.int64)
        self.batch_counts = np.zeros((self.batches, M), dtype=np.int64)
        self.wall_steps = np.zeros(chain.n, dtype=np.int64)

    def update(self, blk):
        pre = blk.k[:-1]
        masks = _masks(pre)
        M = self.counts.size
        self.counts += np.bincount(masks, minlength=M)
        t = blk.t0 + np.arange(blk.steps, dtype=np.int64)
        bidx = t * self.batches // max(self.K, 1)
        self.batch_counts += np.bincount(bidx * M + masks,
                                         minlength=self.batches * M).reshape(self.batches, M)
        self.wall_steps += (pre == 0).sum(axis=0)

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / max(self.counts.sum(), 1)

    def local_time(self) -> np.ndarray:
        """Wall local time per coordinate, ``(time at 0) / s``."""
        return self.wall_steps * self.chain.delta / self.chain.s


class QVObserver(Observer):
    """Quadratic variation of interior increments and cross terms of compensated ones.

    A step of coordinate ``j`` is interior when its pre-move height is
    positive.  Cross terms use ``c_j = dX_j - E[dX_j | X_t]`` so that
    products over distinct coordinates are martingale differences.
    """

    def start(self, chain, phi0, K):
        super().start(chain, phi0, K)
        n = chain.n
        self.interior_steps = np.zeros(n, dtype=np.int64)
        self.sum_sq = np.zeros(n)
        self.up_moves = np.zeros(n, dtype=np.int64)
        self.free_moves = np.zeros(n, dtype=np.int64)  # interior steps below the cap
        self.pair_steps = np.zeros((n, n), dtype=np.int64)
        self.cross_sum = np.zeros((n, n))
        self.cross_sq = np.zeros((n, n))

    def update(self, blk):
        h, K = self.chain.h, self.chain.K
        pre = blk.k[:-1]
        dk = blk.k[1:] - pre
        inter = pre > 0
        free = inter & (pre < K)
        dx = dk * h
        self.interior_steps += inter.sum(axis=0)
        self.sum_sq += np.where(inter, dx * dx, 0.0).sum(axis=0)
        self.up_moves += (free & (dk > 0)).sum(axis=0)
        self.free_moves += free.sum(axis=0)
        mean = np.where(free, 0.5 * h * h * blk.drift, np.where(inter, -h, 0.0))
        c = np.where(inter, dx - mean, 0.0)
        fi = inter.astype(np.int64)
        self.pair_steps += fi.T @ fi
        self.cross_sum += c.T @ c
        self.cross_sq += (c * c).T @ (c * c)


class MartingaleObserver(Observer):
    """Pieces of ``f(X_T) - f(X_0) - int_0^T A f(X_t) dt`` for each test function.

    ``A f`` on a face is the wet part ``sum_{i wet}(d_i^2 f + d_i f b_i)``
    plus the wall push ``(1/s) sum_{i dry} d_i f``; the two integrals are
    kept apart so either can be dropped.
    """

    def __init__(self, functions):
        self.functions = list(functions)

    def start(self, chain, phi0, K):
        super().start(chain, phi0, K)
        m = len(self.functions)
        x0 = np.atleast_2d(phi0)
        self.f0 = np.array([f.value(x0)[0] for f in self.functions])
        self.fT = self.f0.copy()
        self.int_wet = np.zeros(m)
        self.int_wall = np.zeros(m)

    def update(self, blk):
        X = blk.pre
        wet = X > 0
        b = blk.drift
        dt = self.chain.delta
        for i, f in enumerate(self.functions):
            _, g, h2 = f.derivatives(X)
            self.int_wet[i] += dt * np.where(wet, h2 + g * b, 0.0).sum()
            self.int_wall[i] += dt * np.where(wet, 0.0, g).sum() / self.chain.s

    def finish(self, phi):
        x = np.atleast_2d(phi)
        self.fT = np.array([f.value(x)[0] for f in self.functions])

    def residual(self, boundary: bool = True) -> np.ndarray:
        comp = self.int_wet + (self.int_wall if boundary else 0.0)
        return self.fT - self.f0 - comp


class HistogramObserver(Observer):
    """Visits of every grid state (pre-move), flattened in C order."""

    def start(self, chain, phi0, K):
        super().start(chain, phi0, K)
        self.counts = np.zeros(chain.n_states, dtype=np.int64)
        self._strides = (chain.K + 1) ** np.arange(chain.n - 1, -1, -1)

    def update(self, blk):
        idx = blk.k[:-1] @ self._strides
        self.counts += np.bincount(idx, minlength=self.counts.size)

    @property
    def distribution(self) -> np.ndarray:
        return self.counts / max(self.counts.sum(), 1)
