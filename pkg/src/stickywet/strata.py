"""Stratification of the orthant ``E = [0, inf)^n``.

A point belongs to exactly one face ``E_+(B)`` where ``B`` is the set of its
strictly positive coordinates.  Faces are identified by an integer bit mask
(bit ``j`` set iff coordinate ``j`` is positive); mask order is integer order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionTooLarge, InvalidStickiness, Negative, NonFinite

MAX_DIMENSION = 24


class StratumId(int):
    """Bit mask of the strictly positive coordinates of a face."""

    def __new__(cls, mask: int):
        mask = int(mask)
        if mask < 0:
            raise ValueError("stratum mask must be non-negative")
        return super().__new__(cls, mask)

    @property
    def mask(self) -> int:
        return int(self)

    @property
    def size(self) -> int:
        """``#B``, the number of positive coordinates."""
        return bin(self).count("1")

    def members(self) -> tuple[int, ...]:
        """0-based coordinates in ``B``."""
        return tuple(j for j in range(int(self).bit_length()) if self >> j & 1)

    def contains(self, j: int) -> bool:
        return bool(self >> j & 1)

    def is_interior(self, n: int) -> bool:
        return int(self) == (1 << n) - 1

    def __repr__(self) -> str:
        return f"StratumId({{{', '.join(str(j + 1) for j in self.members())}}})"


@dataclass(frozen=True)
class StratumWeight:
    s: float
    n: int
    value: float


def _as_heights(state) -> np.ndarray:
    heights = getattr(state, "heights", state)
    return np.asarray(heights, dtype=float)


def validate_heights(phi) -> np.ndarray:
    """Return ``phi`` as a float array after checking it lies in ``E``."""
    phi = _as_heights(phi)
    if not np.all(np.isfinite(phi)):
        raise NonFinite("state has non-finite coordinates")
    if np.any(phi < 0):
        raise Negative("state has negative coordinates")
    return phi


def stratum_of(state) -> StratumId:
    """Face of ``state``; exact positivity, no tolerance."""
    phi = validate_heights(state)
    if phi.ndim != 1:
        raise ValueError("stratum_of expects a single state")
    if phi.size > MAX_DIMENSION:
        raise DimensionTooLarge(f"n={phi.size} exceeds cap {MAX_DIMENSION}")
    return StratumId(int(masks_of(phi[None, :])[0]))


def masks_of(states) -> np.ndarray:
    """Vectorised stratum masks for an ``(m, n)`` array of states."""
    states = np.asarray(states)
    n = states.shape[-1]
    bits = np.left_shift(np.int64(1), np.arange(n, dtype=np.int64))
    return (states > 0).astype(np.int64) @ bits


def enumerate_strata(n: int) -> list[StratumId]:
    """All ``2^n`` faces in ascending mask order."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if n > MAX_DIMENSION:
        raise DimensionTooLarge(f"n={n} exceeds cap {MAX_DIMENSION}")
    return [StratumId(m) for m in range(1 << n)]


def stratum_weight(n: int, s: float, B) -> StratumWeight:
    """Weight ``s^(n - #B)`` of the face measure."""
    if not (s > 0) or not np.isfinite(s):
        raise InvalidStickiness(f"stickiness must be in (0, inf), got {s}")
    size = StratumId(B).size
    if size > n:
        raise ValueError(f"stratum {B!r} does not fit in dimension {n}")
    return StratumWeight(s=float(s), n=n, value=float(s) ** (n - size))


def weights_array(n: int, s: float) -> np.ndarray:
    """``s^(n - #B)`` for every mask, indexed by mask."""
    if not (s > 0) or not np.isfinite(s):
        raise InvalidStickiness(f"stickiness must be in (0, inf), got {s}")
    sizes = np.array([bin(m).count("1") for m in range(1 << n)])
    return float(s) ** (n - sizes)
