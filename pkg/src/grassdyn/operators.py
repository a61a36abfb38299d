"""Truncated operator catalog.

Every operator acts on a stated finite truncation of a sequence space.
Applications report the mass pushed past the truncation edge as a side
channel so orbit probes can abort when truncation error becomes
meaningful. Backward shifts never leak; forward shifts leak through
their last column.

The analytic spectrum layer knows closed forms for the catalog entries
that have one (diagonal, backward-shift perturbation of a scalar,
scalings and direct sums of those) and refuses the rest.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    SpectrumUnsupportedError,
    TruncationError,
)
from .space import DirectSumVector, Vector

__all__ = [
    "Operator",
    "Diagonal",
    "BackwardShift",
    "ForwardShift",
    "AdjointMultiplication",
    "Scaled",
    "DirectSum",
    "operator_from_json",
    "operator_norm_estimate",
    "SpectrumDescription",
    "Point",
    "Disk",
    "Annulus",
    "analytic_spectrum",
    "circle_intersects_all_components",
    "radial_intersection",
    "mixing_commutation_check",
]

MATRIX_DIM_CAP = 4096


class Operator:
    """Base class: a linear map on a truncated space of dimension `dim`."""

    dim: int

    # -- action --------------------------------------------------------

    def apply_with_loss(self, v):
        """Apply to a Vector (or DirectSumVector) and report leaked mass."""
        raise NotImplementedError

    def apply(self, v):
        return self.apply_with_loss(v)[0]

    def matrix(self) -> np.ndarray:
        """Dense truncated matrix; guarded by a hard dimension cap."""
        if self.dim > MATRIX_DIM_CAP:
            raise TruncationError(f"dim {self.dim} exceeds matrix cap {MATRIX_DIM_CAP}")
        return self._matrix()

    def _matrix(self) -> np.ndarray:
        raise NotImplementedError

    def leak_row(self) -> np.ndarray:
        """Per-column upper bound on mass leaving the truncation.

        Entry i bounds the norm of the untruncated image of e_i beyond
        the edge; the dense orbit kernels use ``leak_row @ |x|`` as a
        conservative per-step loss estimate.
        """
        return np.zeros(self.dim)

    @property
    def is_complex(self) -> bool:
        return False

    # -- codec ----------------------------------------------------------

    def to_json(self) -> dict:
        raise NotImplementedError

    def _check_dim(self, v):
        if v.dim != self.dim:
            raise DimensionMismatchError(f"operator dim {self.dim}, vector dim {v.dim}")


def _enc(z):
    z = complex(z)
    return [z.real, z.imag]


def _dec(pair):
    re, im = pair
    return complex(re, im) if im else float(re)


class Diagonal(Operator):
    """Diagonal operator with the given entries."""

    def __init__(self, entries: Sequence[complex]):
        if not len(entries):
            raise ValueError("need at least one diagonal entry")
        self.entries = tuple(complex(e) if complex(e).imag else float(complex(e).real) for e in entries)
        self.dim = len(self.entries)

    def apply_with_loss(self, v):
        self._check_dim(v)
        return Vector(self.dim, {i: self.entries[i] * x for i, x in v.coords.items()}), 0.0

    def _matrix(self):
        dtype = complex if self.is_complex else float
        return np.diag(np.array(self.entries, dtype=dtype))

    @property
    def is_complex(self):
        return any(isinstance(e, complex) for e in self.entries)

    def to_json(self):
        return {"variant": "diagonal", "dim": self.dim, "params": {"entries": [_enc(e) for e in self.entries]}}


class BackwardShift(Operator):
    """Weighted backward shift: e_i maps to w_i e_{i-1}, e_0 to 0.

    `weights[i]` is the factor used when index i moves down; entry 0 is
    unused. Omitting `weights` gives the classical unweighted shift.
    Backward shifts lose nothing to truncation.
    """

    def __init__(self, dim: int, weights: Sequence[float] | None = None):
        self.dim = int(dim)
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if weights is None:
            weights = [1.0] * self.dim
        if len(weights) != self.dim:
            raise DimensionMismatchError("weights length must equal dim")
        if any(w <= 0 for w in weights[1:]):
            raise ValueError("shift weights must be strictly positive")
        self.weights = tuple(float(w) for w in weights)

    def apply_with_loss(self, v):
        self._check_dim(v)
        coords = {i - 1: self.weights[i] * x for i, x in v.coords.items() if i >= 1}
        return Vector(self.dim, coords), 0.0

    def _matrix(self):
        m = np.zeros((self.dim, self.dim))
        for i in range(1, self.dim):
            m[i - 1, i] = self.weights[i]
        return m

    def to_json(self):
        return {"variant": "backward-shift", "dim": self.dim, "params": {"weights": list(self.weights)}}


class ForwardShift(Operator):
    """Weighted forward shift: e_i maps to w_i e_{i+1}.

    The image of the last basis vector falls outside the truncation;
    its coefficient `weights[dim-1]` is reported as lost mass rather
    than silently dropped.
    """

    def __init__(self, dim: int, weights: Sequence[float] | None = None):
        self.dim = int(dim)
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if weights is None:
            weights = [1.0] * self.dim
        if len(weights) != self.dim:
            raise DimensionMismatchError("weights length must equal dim")
        if any(w <= 0 for w in weights):
            raise ValueError("shift weights must be strictly positive")
        self.weights = tuple(float(w) for w in weights)

    def apply_with_loss(self, v):
        self._check_dim(v)
        coords = {}
        lost = 0.0
        for i, x in v.coords.items():
            if i + 1 < self.dim:
                coords[i + 1] = self.weights[i] * x
            else:
                lost += abs(self.weights[i] * x)
        return Vector(self.dim, coords), lost

    def _matrix(self):
        m = np.zeros((self.dim, self.dim))
        for i in range(self.dim - 1):
            m[i + 1, i] = self.weights[i]
        return m

    def leak_row(self):
        row = np.zeros(self.dim)
        row[self.dim - 1] = self.weights[self.dim - 1]
        return row

    def to_json(self):
        return {"variant": "forward-shift", "dim": self.dim, "params": {"weights": list(self.weights)}}


class AdjointMultiplication(Operator):
    """a Id + B: the adjoint-of-multiplier model for a degree-one symbol."""

    def __init__(self, a: complex, dim: int):
        self.a = complex(a) if complex(a).imag else float(complex(a).real)
        self.dim = int(dim)
        if self.dim <= 0:
            raise ValueError("dim must be positive")

    def apply_with_loss(self, v):
        self._check_dim(v)
        coords = {i: self.a * x for i, x in v.coords.items() if self.a != 0}
        for i, x in v.coords.items():
            if i >= 1:
                coords[i - 1] = coords.get(i - 1, 0) + x
        return Vector(self.dim, coords), 0.0

    def _matrix(self):
        dtype = complex if self.is_complex else float
        m = np.zeros((self.dim, self.dim), dtype=dtype)
        np.fill_diagonal(m, self.a)
        for i in range(1, self.dim):
            m[i - 1, i] += 1.0
        return m

    @property
    def is_complex(self):
        return isinstance(self.a, complex)

    def to_json(self):
        return {"variant": "adjoint-multiplication", "dim": self.dim, "params": {"a": _enc(self.a)}}


class Scaled(Operator):
    """c times another operator; c must be nonzero."""

    def __init__(self, c: complex, inner: Operator):
        c = complex(c)
        if c == 0:
            raise ValueError("scale factor must be nonzero")
        self.c = c if c.imag else float(c.real)
        self.inner = inner
        self.dim = inner.dim

    def apply_with_loss(self, v):
        out, lost = self.inner.apply_with_loss(v)
        if isinstance(out, DirectSumVector):
            out = DirectSumVector(b.scale(self.c) for b in out.blocks)
        else:
            out = out.scale(self.c)
        return out, abs(self.c) * lost

    def _matrix(self):
        return self.c * self.inner.matrix()

    def leak_row(self):
        return abs(self.c) * self.inner.leak_row()

    @property
    def is_complex(self):
        return isinstance(self.c, complex) or self.inner.is_complex

    def to_json(self):
        return {"variant": "scaled", "dim": self.dim, "params": {"c": _enc(self.c), "inner": self.inner.to_json()}}


class DirectSum(Operator):
    """Block-diagonal sum; accepts block vectors or flat vectors."""

    def __init__(self, blocks: Sequence[Operator]):
        self.blocks = tuple(blocks)
        if not self.blocks:
            raise ValueError("direct sum needs at least one block")
        self.dim = sum(b.dim for b in self.blocks)

    def apply_with_loss(self, v):
        if isinstance(v, DirectSumVector):
            if len(v.blocks) != len(self.blocks):
                raise DimensionMismatchError("block counts differ")
            outs, lost = [], 0.0
            for op, blk in zip(self.blocks, v.blocks):
                o, l = op.apply_with_loss(blk)
                outs.append(o)
                lost += l
            return DirectSumVector(outs), lost
        self._check_dim(v)
        return self._apply_flat(v)

    def _apply_flat(self, v: Vector):
        coords = {}
        lost = 0.0
        offset = 0
        for op in self.blocks:
            blk = Vector(op.dim, {i - offset: x for i, x in v.coords.items() if offset <= i < offset + op.dim})
            out, l = op.apply_with_loss(blk)
            for i, x in out.coords.items():
                coords[offset + i] = x
            lost += l
            offset += op.dim
        return Vector(self.dim, coords), lost

    def _matrix(self):
        dtype = complex if self.is_complex else float
        m = np.zeros((self.dim, self.dim), dtype=dtype)
        offset = 0
        for op in self.blocks:
            m[offset : offset + op.dim, offset : offset + op.dim] = op.matrix()
            offset += op.dim
        return m

    def leak_row(self):
        return np.concatenate([b.leak_row() for b in self.blocks])

    @property
    def is_complex(self):
        return any(b.is_complex for b in self.blocks)

    def to_json(self):
        return {"variant": "direct-sum", "dim": self.dim, "params": {"blocks": [b.to_json() for b in self.blocks]}}


def operator_from_json(obj: dict) -> Operator:
    """Rebuild an operator from its JSON description."""
    variant = obj["variant"]
    params = obj.get("params", {})
    if variant == "diagonal":
        return Diagonal([_dec(e) for e in params["entries"]])
    if variant == "backward-shift":
        return BackwardShift(obj["dim"], params.get("weights"))
    if variant == "forward-shift":
        return ForwardShift(obj["dim"], params.get("weights"))
    if variant == "adjoint-multiplication":
        return AdjointMultiplication(_dec(params["a"]), obj["dim"])
    if variant == "scaled":
        return Scaled(_dec(params["c"]), operator_from_json(params["inner"]))
    if variant == "direct-sum":
        return DirectSum([operator_from_json(b) for b in params["blocks"]])
    if variant == "perturbed-forward-shift":
        from .construction import ConstructionParams, build_operator

        return build_operator(ConstructionParams.from_json(params), obj["dim"])
    raise ValueError(f"unknown operator variant {variant!r}")


def operator_norm_estimate(op: Operator, iters: int = 60, seed: int = 0) -> float:
    """Power-iteration lower bound for the truncated operator norm.

    Runs `iters` steps of power iteration on the Gram operator and
    returns ``||A v||`` for the final unit iterate, which is a lower
    bound on the largest singular value and is nondecreasing in `iters`
    for a fixed seed.
    """
    a = op.matrix()
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(op.dim)
    if op.is_complex:
        v = v + 1j * rng.standard_normal(op.dim)
    v = v / np.linalg.norm(v)
    ah = a.conj().T
    for _ in range(max(0, iters)):
        w = ah @ (a @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
    return float(np.linalg.norm(a @ v))


# -- analytic spectrum ----------------------------------------------------


class Point(NamedTuple):
    value: complex

    def radial_interval(self):
        r = abs(self.value)
        return (r, r)

    def scaled(self, c):
        return Point(self.value * c)

    def describe(self):
        return {"kind": "point", "value": _enc(self.value)}


class Disk(NamedTuple):
    center: complex
    radius: float

    def radial_interval(self):
        d = abs(self.center)
        return (max(0.0, d - self.radius), d + self.radius)

    def scaled(self, c):
        return Disk(self.center * c, self.radius * abs(c))

    def describe(self):
        return {"kind": "disk", "center": _enc(self.center), "radius": self.radius}


class Annulus(NamedTuple):
    center: complex
    r_inner: float
    r_outer: float

    def radial_interval(self):
        d = abs(self.center)
        if d < self.r_inner:
            lo = self.r_inner - d
        elif d <= self.r_outer:
            lo = 0.0
        else:
            lo = d - self.r_outer
        return (lo, d + self.r_outer)

    def scaled(self, c):
        return Annulus(self.center * c, self.r_inner * abs(c), self.r_outer * abs(c))

    def describe(self):
        return {"kind": "annulus", "center": _enc(self.center), "r_inner": self.r_inner, "r_outer": self.r_outer}


class SpectrumDescription(NamedTuple):
    """Connected components of a closed-form spectrum."""

    components: tuple

    def describe(self):
        return [c.describe() for c in self.components]


def analytic_spectrum(op: Operator) -> SpectrumDescription:
    """Closed-form spectrum for catalog entries that have one.

    Diagonal operators contribute their entries as points; the
    degree-one adjoint multiplier contributes the closed unit disk
    around its scalar term; scalings multiply; direct sums take unions.
    Shifts and perturbed shifts have no closed form here and raise.
    """
    if isinstance(op, Diagonal):
        seen, comps = set(), []
        for e in op.entries:
            if e not in seen:
                seen.add(e)
                comps.append(Point(e))
        return SpectrumDescription(tuple(comps))
    if isinstance(op, AdjointMultiplication):
        return SpectrumDescription((Disk(op.a, 1.0),))
    if isinstance(op, Scaled):
        inner = analytic_spectrum(op.inner)
        return SpectrumDescription(tuple(c.scaled(op.c) for c in inner.components))
    if isinstance(op, DirectSum):
        comps = []
        for b in op.blocks:
            comps.extend(analytic_spectrum(b).components)
        dedup = []
        for c in comps:
            if c not in dedup:
                dedup.append(c)
        return SpectrumDescription(tuple(dedup))
    raise SpectrumUnsupportedError(f"no closed-form spectrum for {type(op).__name__}")


def circle_intersects_all_components(desc: SpectrumDescription, radius: float, tol: float = 1e-12) -> bool:
    """Does the circle |z| = radius meet every spectral component?"""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    for comp in desc.components:
        lo, hi = comp.radial_interval()
        if not (lo - tol <= radius <= hi + tol):
            return False
    return True


def radial_intersection(desc: SpectrumDescription):
    """Exact interval of radii whose circles meet every component.

    Returns (lo, hi) or None when no circle works. Intervals are closed;
    the computation intersects per-component radial ranges.
    """
    lo = 0.0
    hi = math.inf
    for comp in desc.components:
        clo, chi = comp.radial_interval()
        lo = max(lo, clo)
        hi = min(hi, chi)
    if lo > hi + 1e-15:
        return None
    return (lo, hi)


class MixingCheck(NamedTuple):
    passed: bool
    max_deviation: float


def mixing_commutation_check(op: Operator, vectors: Sequence[Vector], mix: np.ndarray, k: int = 1, tol: float = 1e-10) -> MixingCheck:
    """Check that diagonal powers commute with invertible tuple mixing.

    Applies the diagonal action of `op` to the tuple and to its image
    under the mixing matrix, and compares mixing-then-iterating against
    iterating-then-mixing in relative scale. Raises on a numerically
    singular mixing matrix.
    """
    mix = np.asarray(mix)
    p = len(vectors)
    if mix.shape != (p, p):
        raise DimensionMismatchError(f"mixing matrix must be {p}x{p}")
    if abs(np.linalg.det(mix)) <= 1e-12:
        raise ValueError("mixing matrix is numerically singular")
    cols = np.stack([v.to_dense(dtype=complex if op.is_complex else float) for v in vectors], axis=1)
    a = op.matrix()
    iterated = cols.copy()
    for _ in range(k):
        iterated = a @ iterated
    lhs = iterated @ mix
    rhs = cols @ mix
    for _ in range(k):
        rhs = a @ rhs
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))), 1e-300)
    dev = float(np.max(np.abs(lhs - rhs))) / scale
    return MixingCheck(dev <= tol, dev)
