"""Truncated sequence-space vectors.

Vectors are sparse maps from coordinate index to scalar over a stated
ambient dimension. Scalars may be floats, complex numbers, or
fractions.Fraction for the exact layer; exact zeros are pruned on
construction so equality and support queries are reliable. Direct sums
are represented as ordered blocks.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .errors import DimensionMismatchError
from ._util import as_generator, scalar_from_json, scalar_to_json

__all__ = [
    "Vector",
    "DirectSumVector",
    "l1_norm",
    "l2_norm",
    "sample_vector",
]


class Vector:
    """Sparse vector with explicit ambient dimension.

    Parameters
    ----------
    dim : int
        Ambient dimension; must be positive.
    coords : mapping of int to scalar
        Nonzero coordinates. Exact zeros are dropped; indices must lie
        in ``[0, dim)``.
    """

    __slots__ = ("dim", "coords")

    def __init__(self, dim: int, coords: Mapping[int, object] | None = None):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        pruned = {}
        for i, x in (coords or {}).items():
            i = int(i)
            if not 0 <= i < self.dim:
                raise DimensionMismatchError(f"index {i} outside [0, {self.dim})")
            if x != 0:
                pruned[i] = x
        self.coords = pruned

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, dim: int) -> "Vector":
        return cls(dim, {})

    @classmethod
    def basis(cls, dim: int, i: int) -> "Vector":
        return cls(dim, {i: 1.0})

    @classmethod
    def from_dense(cls, arr) -> "Vector":
        arr = np.asarray(arr)
        coords = {}
        for i, x in enumerate(arr):
            x = complex(x)
            if x != 0:
                coords[i] = x if x.imag else x.real
        return cls(len(arr), coords)

    # -- arithmetic ----------------------------------------------------

    def add(self, other: "Vector") -> "Vector":
        if self.dim != other.dim:
            raise DimensionMismatchError("vector dims differ")
        coords = dict(self.coords)
        for i, x in other.coords.items():
            coords[i] = coords.get(i, 0) + x
        return Vector(self.dim, coords)

    def scale(self, c) -> "Vector":
        return Vector(self.dim, {i: c * x for i, x in self.coords.items()})

    def support(self) -> list[int]:
        return sorted(self.coords)

    def to_dense(self, dtype=None):
        if dtype is None:
            dtype = complex if any(isinstance(x, complex) for x in self.coords.values()) else float
        out = np.zeros(self.dim, dtype=dtype)
        for i, x in self.coords.items():
            out[i] = x
        return out

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict:
        entries = [[i, *scalar_to_json(self.coords[i])] for i in sorted(self.coords)]
        return {"dim": self.dim, "coords": entries}

    @classmethod
    def from_json(cls, obj: dict) -> "Vector":
        coords = {int(i): scalar_from_json(re, im) for i, re, im in obj["coords"]}
        return cls(int(obj["dim"]), coords)

    def __eq__(self, other):
        return (
            isinstance(other, Vector)
            and self.dim == other.dim
            and self.coords == other.coords
        )

    def __repr__(self):
        head = {i: self.coords[i] for i in self.support()[:4]}
        tail = "..." if len(self.coords) > 4 else ""
        return f"Vector(dim={self.dim}, coords={head}{tail})"


class DirectSumVector:
    """Ordered direct sum of sparse vectors; blocks keep their own dims."""

    __slots__ = ("blocks",)

    def __init__(self, blocks: Iterable[Vector]):
        self.blocks = tuple(blocks)
        if not self.blocks:
            raise ValueError("direct sum needs at least one block")

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    def flatten(self) -> Vector:
        coords = {}
        offset = 0
        for b in self.blocks:
            for i, x in b.coords.items():
                coords[offset + i] = x
            offset += b.dim
        return Vector(self.dim, coords)

    def to_json(self) -> dict:
        return {"blocks": [b.to_json() for b in self.blocks]}

    @classmethod
    def from_json(cls, obj: dict) -> "DirectSumVector":
        return cls(Vector.from_json(b) for b in obj["blocks"])

    def __eq__(self, other):
        return isinstance(other, DirectSumVector) and self.blocks == other.blocks

    def __repr__(self):
        return f"DirectSumVector(dims={[b.dim for b in self.blocks]})"


def l1_norm(v) -> object:
    """Sum of coordinate absolute values.

    Exact (a Fraction) when every coordinate is a Fraction, float
    otherwise. Direct sums aggregate over blocks.
    """
    if isinstance(v, DirectSumVector):
        return sum(l1_norm(b) for b in v.blocks)
    vals = list(v.coords.values())
    if all(isinstance(x, Fraction) for x in vals):
        return sum((abs(x) for x in vals), Fraction(0))
    return float(sum(abs(x) for x in vals))


def l2_norm(v) -> float:
    """Euclidean norm; always a float."""
    if isinstance(v, DirectSumVector):
        return math.sqrt(sum(l2_norm(b) ** 2 for b in v.blocks))
    return math.sqrt(float(sum(abs(x) ** 2 for x in v.coords.values())))


def sample_vector(dim: int, support, seed) -> Vector:
    """Draw a vector with i.i.d. standard Gaussian coordinates on `support`.

    Parameters
    ----------
    dim : int
        Ambient dimension.
    support : range, (lo, hi) pair, or iterable of indices
        Indices allowed to be nonzero; ``(lo, hi)`` means ``range(lo, hi)``.
    seed : int, numpy SeedSequence or Generator
        Source of randomness; fixed seeds give identical draws.

    The draw is redone (fresh randomness) in the measure-zero event that
    every coordinate comes out exactly zero.
    """
    if isinstance(support, tuple) and len(support) == 2:
        support = range(support[0], support[1])
    idx = sorted(set(int(i) for i in support))
    if not idx:
        raise ValueError("support is empty")
    if idx[0] < 0 or idx[-1] >= dim:
        raise DimensionMismatchError(f"support {idx[0]}..{idx[-1]} outside [0, {dim})")
    rng = as_generator(seed)
    while True:
        vals = rng.standard_normal(len(idx))
        if np.any(vals != 0.0):
            return Vector(dim, {i: float(x) for i, x in zip(idx, vals)})
