"""Search/context boxes and input-point packing.

Every observation lives at a point made of a context vector ``s`` and a
parameter vector ``x`` (plus a second parameter vector ``x2`` for duels).
Internally the toolkit works on flat "packed" arrays ``[s, x]`` or
``[s, x, x2]``; :class:`InputPoint` is the structured view used at API
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with vector bounds."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("bounds shape mismatch")
        if np.any(hi < lo):
            raise ValueError("upper bound below lower bound")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_range(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def contains(self, x, atol: float = 1e-9) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lo - atol) and np.all(x <= self.hi + atol))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        if size is None:
            return rng.uniform(self.lo, self.hi)
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))

    def concat(self, other: "Box") -> "Box":
        return Box(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))


EMPTY_BOX = Box(np.empty(0), np.empty(0))


@dataclass(frozen=True)
class InputPoint:
    """A query location: context ``s``, parameters ``x``, optional duel partner."""

    s: np.ndarray
    x: np.ndarray
    x2: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "s", np.atleast_1d(np.asarray(self.s, dtype=float)))
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))
        if self.x2 is not None:
            x2 = np.atleast_1d(np.asarray(self.x2, dtype=float))
            if x2.shape != self.x.shape:
                raise ValueError("duel partner dimension mismatch")
            object.__setattr__(self, "x2", x2)

    @property
    def is_duel(self) -> bool:
        return self.x2 is not None

    @property
    def packed(self) -> np.ndarray:
        parts = [self.s, self.x] + ([self.x2] if self.x2 is not None else [])
        return np.concatenate(parts)

    @classmethod
    def from_packed(cls, z, context_dim: int, search_dim: int, duel: bool = False):
        z = np.asarray(z, dtype=float)
        s = z[:context_dim]
        x = z[context_dim:context_dim + search_dim]
        x2 = z[context_dim + search_dim:] if duel else None
        return cls(s=s, x=x, x2=x2)


@dataclass(frozen=True)
class Domain:
    """Context box × search box, with packing helpers for both query modes."""

    context_box: Box
    search_box: Box
    duel: bool = False

    @property
    def context_dim(self) -> int:
        return self.context_box.dim

    @property
    def search_dim(self) -> int:
        return self.search_box.dim

    @property
    def packed_box(self) -> Box:
        box = self.context_box.concat(self.search_box)
        if self.duel:
            box = box.concat(self.search_box)
        return box

    @property
    def value_box(self) -> Box:
        """Box for a (s, x) value point, ignoring any duel partner."""
        return self.context_box.concat(self.search_box)

    def pack(self, s, x, x2=None) -> np.ndarray:
        return InputPoint(s=np.atleast_1d(s), x=x, x2=x2).packed

    def unpack(self, z) -> InputPoint:
        return InputPoint.from_packed(z, self.context_dim, self.search_dim, self.duel)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.packed_box.sample(rng)


def as_packed(p) -> np.ndarray:
    if isinstance(p, InputPoint):
        return p.packed
    return np.atleast_1d(np.asarray(p, dtype=float))
