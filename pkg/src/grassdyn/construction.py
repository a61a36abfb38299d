"""Exact machinery behind the perturbed weighted forward shift.

The operator acts as a weighted forward shift except at a sparse set
of jump indices b_n, where one column is replaced so that the b_n-th
power of the operator maps the cyclic vector onto a prescribed
polynomial image plus the b_n-th basis vector (the defining relation).
This module holds everything needed to build and audit that operator:

- weights and the two jump-index schemes,
- derived integer control caps keeping the replaced columns small,
- an exact-rational enumeration of polynomials and of polynomial
  tuples (singles at every component, and scaled repetition blocks),
  with constructive locators,
- exact orbit coordinates of the cyclic vector (triangular recursion),
- the perturbation data (eps_n, f_n) and its size check,
- the operator itself and direct sums of blocks.

Exactness boundary: polynomial identities are exact rationals; weight
products are high-precision floats at the precision carried by the
parameter record. Memo tables are append-only: a computed entry is
never mutated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath

from ._util import exp_neg, pow2_neg
from .errors import (
    ConfigError,
    GrassdynError,
    MassLossError,
    SchemeInconsistencyError,
    TruncationError,
)
from .operators import DirectSum, Operator
from .space import DirectSumVector, Vector

__all__ = [
    "SCHEMES",
    "Polynomial",
    "ConstructionParams",
    "index_b",
    "weight",
    "weight_product",
    "derive_control_sequence",
    "control_value",
    "controlled_by",
    "rational_at",
    "rational_index",
    "polynomial_at",
    "polynomial_index",
    "STupleFamily",
    "s_family",
    "enumerate_S",
    "q_sequence",
    "admissible_for_p",
    "verify_claim",
    "locate_polynomial",
    "locate_repetition",
    "repetition_block_certificate",
    "ClassicAdmissible",
    "Section43Admissible",
    "admissible_sequence",
    "admissible_polynomial",
    "orbit_vector_coords",
    "epsilon_f",
    "check_f_bound",
    "defining_relation_check",
    "PerturbedForwardShift",
    "build_operator",
    "build_direct_sum",
]

SCHEMES = ("pow2p1", "pow5")
ADMISSIBLE_SOURCES = ("classic", "section43")
DEFAULT_C_CONSTANT = math.log(4.0 / 3.0)
DEFAULT_PRECISION_BITS = 256
DEFAULT_MEMO_CAP = 700
CLOSURE_TOLERANCE = 1e-8
RATIONAL_PATH_BUDGET = 10_000_000


# -- polynomials -----------------------------------------------------------


class Polynomial:
    """Polynomial with exact rational coefficients.

    `coeffs[i]` is the coefficient of the i-th power; trailing zeros
    are pruned, so the zero polynomial has empty coefficients and
    degree -1. Instances are immutable by convention and hashable.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence = ()):
        cs = [c if type(c) is Fraction else Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)

    @classmethod
    def zero(cls) -> "Polynomial":
        return cls()

    @classmethod
    def one(cls) -> "Polynomial":
        return cls((1,))

    @classmethod
    def x_power(cls, k: int) -> "Polynomial":
        if k < 0:
            raise ValueError("power must be >= 0")
        return cls((0,) * k + (1,))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def l1(self) -> Fraction:
        return sum((abs(c) for c in self.coeffs), Fraction(0))

    @property
    def leading(self) -> Fraction:
        if self.is_zero:
            raise ValueError("the zero polynomial has no leading coefficient")
        return self.coeffs[-1]

    def coefficient(self, i: int) -> Fraction:
        return self.coeffs[i] if 0 <= i < len(self.coeffs) else Fraction(0)

    def shift(self, k: int) -> "Polynomial":
        """Multiply by the k-th power of the variable."""
        if self.is_zero:
            return self
        return Polynomial((Fraction(0),) * k + self.coeffs)

    def evaluate(self, x) -> Fraction:
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        return Polynomial(
            [self.coefficient(i) + other.coefficient(i) for i in range(n)]
        )

    def __neg__(self) -> "Polynomial":
        return Polynomial([-c for c in self.coeffs])

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            if self.is_zero or other.is_zero:
                return Polynomial()
            out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
            for i, a in enumerate(self.coeffs):
                if a == 0:
                    continue
                for j, b in enumerate(other.coeffs):
                    if b != 0:
                        out[i + j] += a * b
            return Polynomial(out)
        return Polynomial([c * Fraction(other) for c in self.coeffs])

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Polynomial) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __repr__(self) -> str:
        if self.is_zero:
            return "Polynomial(0)"
        terms = [f"{c}*X^{i}" for i, c in enumerate(self.coeffs) if c != 0]
        return "Polynomial(" + " + ".join(terms) + ")"

    def to_strings(self) -> list:
        return [f"{c.numerator}/{c.denominator}" for c in self.coeffs]

    @classmethod
    def from_strings(cls, items: Sequence[str]) -> "Polynomial":
        return cls([Fraction(s) for s in items])


# -- parameters ------------------------------------------------------------


def index_b(n: int, scheme: str, p: int) -> int:
    """Exact n-th jump index for the given scheme."""
    if n < 0:
        raise ValueError("jump index position must be >= 0")
    if scheme == "pow2p1":
        return 1 if n == 0 else (2 * p + 1) ** n
    if scheme == "pow5":
        return 0 if n == 0 else 5 ** n
    raise ConfigError(f"unknown index scheme {scheme!r}")


def weight(n: int) -> float:
    """Shift weight 4(1 - 1/(2 sqrt(n))); always in [2, 4)."""
    if n < 1:
        raise ValueError("weight index must be >= 1")
    return 4.0 * (1.0 - 0.5 / math.sqrt(n))


def _weight_mpf(n: int):
    return 4 * (1 - 1 / (2 * mpmath.sqrt(n)))


@dataclass(frozen=True)
class ConstructionParams:
    """Immutable parameter record for one perturbed-shift block.

    `overrides` replaces enumerated polynomials at given indices; it
    exists for negative controls and must stay empty in honest runs.
    """

    p: int
    scheme: str
    c_constant: float = DEFAULT_C_CONSTANT
    control_mode: str = "derived"
    explicit_controls: tuple | None = None
    admissible_source: str = "section43"
    precision_bits: int = DEFAULT_PRECISION_BITS
    memo_cap: int = DEFAULT_MEMO_CAP
    overrides: tuple = ()

    def __post_init__(self):
        if self.p < 2:
            raise ConfigError("p must be >= 2")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown index scheme {self.scheme!r}")
        if self.control_mode not in ("derived", "explicit"):
            raise ConfigError(f"unknown control mode {self.control_mode!r}")
        if self.control_mode == "explicit" and not self.explicit_controls:
            raise ConfigError("explicit control mode needs explicit_controls")
        if self.admissible_source not in ADMISSIBLE_SOURCES:
            raise ConfigError(f"unknown admissible source {self.admissible_source!r}")
        if not self.c_constant > 0:
            raise ConfigError("c_constant must be positive")
        if self.precision_bits < 64:
            raise ConfigError("precision_bits must be >= 64")
        if self.memo_cap < 8:
            raise ConfigError("memo_cap must be >= 8")

    def b(self, n: int) -> int:
        return index_b(n, self.scheme, self.p)

    @property
    def override_map(self) -> dict:
        return {n: poly for n, poly in self.overrides}

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "scheme": self.scheme,
            "c_constant": self.c_constant,
            "control_mode": self.control_mode,
            "explicit_controls": list(self.explicit_controls) if self.explicit_controls else None,
            "admissible_source": self.admissible_source,
            "precision_bits": self.precision_bits,
            "memo_cap": self.memo_cap,
            "overrides": [[n, poly.to_strings()] for n, poly in self.overrides],
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "ConstructionParams":
        explicit = obj.get("explicit_controls")
        overrides = tuple(
            (int(n), Polynomial.from_strings(cs)) for n, cs in obj.get("overrides", [])
        )
        return cls(
            p=int(obj["p"]),
            scheme=obj["scheme"],
            c_constant=float(obj.get("c_constant", DEFAULT_C_CONSTANT)),
            control_mode=obj.get("control_mode", "derived"),
            explicit_controls=tuple(int(u) for u in explicit) if explicit else None,
            admissible_source=obj.get("admissible_source", "section43"),
            precision_bits=int(obj.get("precision_bits", DEFAULT_PRECISION_BITS)),
            memo_cap=int(obj.get("memo_cap", DEFAULT_MEMO_CAP)),
            overrides=overrides,
        )


# -- control sequences -----------------------------------------------------

_CONTROL_CACHE: dict = {}


def _cap_bound(u: int, u_prev: int, b_prev: int, c):
    """Perturbation-size bound with caps substituted for the polynomials.

    Degree cap u - 1 and coefficient-sum cap u at the current step,
    u_prev - 1 and u_prev at the previous one.
    """
    if u == 0 and u_prev == 0:
        return mpmath.mpf(0)
    term = mpmath.mpf(u) * pow2_neg(b_prev) + mpmath.mpf(u_prev) * exp_neg(
        c * mpmath.sqrt(b_prev)
    )
    return mpmath.power(4, max(u, u_prev)) * term


def _extend_controls(params: ConstructionParams, upto: int) -> list:
    vals = _CONTROL_CACHE.setdefault(params, [0])
    if upto < len(vals):
        return vals
    with mpmath.workprec(params.precision_bits):
        c = mpmath.mpf(params.c_constant)
        for n in range(len(vals), upto + 1):
            u_prev = vals[-1]
            b_prev = params.b(n - 1)
            b_cur = params.b(n)

            def feasible(u: int) -> bool:
                # the cap must keep this step's bound at most one AND
                # stay self-sustaining at the next step, else no
                # nondecreasing continuation exists
                return (
                    _cap_bound(u, u_prev, b_prev, c) <= 1
                    and _cap_bound(u, u, b_cur, c) <= 1
                )

            if not feasible(u_prev):
                raise SchemeInconsistencyError(
                    f"no admissible control cap at n={n} "
                    f"(scheme {params.scheme}, c={params.c_constant})"
                )
            lo, hi = u_prev, u_prev + 1
            for _ in range(400):
                if not feasible(hi):
                    break
                lo, hi = hi, hi * 2
            else:
                raise SchemeInconsistencyError(f"control cap search diverged at n={n}")
            while lo + 1 < hi:
                mid = (lo + hi) // 2
                if feasible(mid):
                    lo = mid
                else:
                    hi = mid
            vals.append(lo)
    return vals


def control_value(params: ConstructionParams, n: int) -> int:
    """Integer cap u_n for the n-th enumerated polynomial."""
    if n < 0:
        raise ValueError("control index must be >= 0")
    if params.control_mode == "explicit":
        if n >= len(params.explicit_controls):
            raise ConfigError(
                f"explicit control sequence has no entry at n={n}"
            )
        return int(params.explicit_controls[n])
    return _extend_controls(params, n)[n]


def derive_control_sequence(params: ConstructionParams, upto: int) -> list:
    """Caps u_0..u_upto; largest nondecreasing caps keeping the bound <= 1.

    Each u_n is the largest integer such that substituting degree
    u_n - 1 and coefficient sum u_n into the perturbation bound keeps
    it at most one, while remaining continuable (the same bound with
    the cap repeated at the next step also stays at most one). Without
    the continuation clause the greedy cap dead-ends after two steps.
    """
    if upto < 1:
        raise ValueError("need upto >= 1")
    return [control_value(params, n) for n in range(upto + 1)]


def controlled_by(seq, controls, upto: int) -> bool:
    """Exact cap check: degree strictly below, coefficient sum at most.

    `seq` is an admissible sequence object (or a callable n -> poly);
    `controls` is an integer sequence (or callable).
    """
    poly_of = seq.polynomial if hasattr(seq, "polynomial") else seq
    cap_of = controls.__getitem__ if hasattr(controls, "__getitem__") else controls
    for n in range(upto + 1):
        poly = poly_of(n)
        cap = cap_of(n)
        if not (poly.degree < cap and poly.l1 <= cap):
            return False
    return True


# -- exact enumerations ----------------------------------------------------


def _fusc(m: int) -> int:
    # Stern's diatomic sequence by binary descent
    a, b = 1, 0
    for bit in bin(m)[2:]:
        if bit == "1":
            b = a + b
        else:
            a = a + b
    return b


def rational_at(j: int) -> Fraction:
    """j-th rational: zero, then positive/negative tree values interleaved."""
    if j < 0:
        raise ValueError("index must be >= 0")
    if j == 0:
        return Fraction(0)
    m = (j + 1) // 2
    val = Fraction(_fusc(m), _fusc(m + 1))
    return val if j % 2 == 1 else -val


def rational_index(q) -> int:
    """Inverse of rational_at, via the tree path of the reduced fraction.

    The tree path has one bit per continued-fraction step, so its
    length grows with the fraction's height; paths longer than
    RATIONAL_PATH_BUDGET bits are refused rather than materialized.
    """
    q = Fraction(q)
    if q == 0:
        return 0
    a, b = abs(q.numerator), abs(q.denominator)
    bits = []
    total = 0
    while not (a == 1 and b == 1):
        if a > b:
            step = (a - 1) // b
            total += step
            if total > RATIONAL_PATH_BUDGET:
                raise ValueError(
                    f"tree path for {q} exceeds {RATIONAL_PATH_BUDGET} bits"
                )
            bits.append("1" * step)
            a -= step * b
        else:
            step = (b - 1) // a
            total += step
            if total > RATIONAL_PATH_BUDGET:
                raise ValueError(
                    f"tree path for {q} exceeds {RATIONAL_PATH_BUDGET} bits"
                )
            bits.append("0" * step)
            b -= step * a
    m = int("1" + "".join(reversed("".join(bits))), 2)
    return 2 * m - 1 if q > 0 else 2 * m


def _pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def _unpair(z: int) -> tuple:
    w = (math.isqrt(8 * z + 1) - 1) // 2
    b = z - w * (w + 1) // 2
    return w - b, b


def _unpack_indices(z: int, count: int) -> tuple:
    if count == 1:
        return (z,)
    head, rest = _unpair(z)
    return (head,) + _unpack_indices(rest, count - 1)


def _pack_indices(idxs: Sequence[int]) -> int:
    if len(idxs) == 1:
        return idxs[0]
    return _pair(idxs[0], _pack_indices(idxs[1:]))


def polynomial_at(q: int) -> Polynomial:
    """q-th rational polynomial; zero at q = 0, nonzero for q >= 1."""
    if q < 0:
        raise ValueError("index must be >= 0")
    if q == 0:
        return Polynomial.zero()
    degree, tail = _unpair(q - 1)
    idxs = _unpack_indices(tail, degree + 1)
    coeffs = [rational_at(i) for i in idxs[:degree]]
    coeffs.append(rational_at(idxs[degree] + 1))
    return Polynomial(coeffs)


def polynomial_index(poly: Polynomial) -> int:
    """Inverse of polynomial_at."""
    if poly.is_zero:
        return 0
    degree = poly.degree
    idxs = [rational_index(c) for c in poly.coeffs[:degree]]
    idxs.append(rational_index(poly.leading) - 1)
    return _pair(degree, _pack_indices(idxs)) + 1


class STupleFamily:
    """One tuple family of the triangle enumeration, at a fixed length.

    Tuples have length ``i + 1``. Subscripts up to the (i+1)-th jump
    index are all-zero. Afterwards a deterministic queue alternates
    two streams: singles (every rational polynomial at every
    component, by diagonals) and scaled repetition blocks (k times a
    polynomial, repeated in the first k components, for every k that
    fits the length). At each subscript the queue head is emitted when
    it fits the subscript's integer cap (degree strictly below,
    coefficient sum at most); otherwise the subscript gets the zero
    tuple and the head waits. Caps grow without bound, so every item
    is eventually emitted: this yields constructive surjectivity and
    unboundedly scaled repetitions.
    """

    def __init__(self, params: ConstructionParams, i: int):
        if i < 0:
            raise ValueError("tuple family index must be >= 0")
        self.params = params
        self.i = i
        self.prefix_end = params.b(i + 1)
        self._tuples: list = []
        self._sigma, self._c = 1, 0
        self._bt = 1
        self._turn = 0
        self._pending = None

    def zero_tuple(self) -> tuple:
        return (Polynomial.zero(),) * (self.i + 1)

    def tuple_at(self, s: int) -> tuple:
        if s < 0:
            raise ValueError("subscript must be >= 0")
        if s <= self.prefix_end:
            return self.zero_tuple()
        idx = s - self.prefix_end - 1
        while len(self._tuples) <= idx:
            self._advance()
        return self._tuples[idx]

    def _advance(self):
        s = self.prefix_end + 1 + len(self._tuples)
        cap = control_value(self.params, s)
        if self._pending is None:
            self._pending = self._next_item()
        fits = all(
            comp.degree < cap and comp.l1 <= cap
            for comp in self._pending
            if not comp.is_zero
        )
        if fits:
            self._tuples.append(self._pending)
            self._pending = None
        else:
            self._tuples.append(self.zero_tuple())

    def _next_item(self) -> tuple:
        item = self._next_single() if self._turn == 0 else self._next_block()
        self._turn ^= 1
        return item

    def _next_single(self) -> tuple:
        while self._c > min(self._sigma - 1, self.i):
            self._sigma += 1
            self._c = 0
        c, q = self._c, self._sigma - self._c
        self._c += 1
        comps = [Polynomial.zero()] * (self.i + 1)
        comps[c] = polynomial_at(q)
        return tuple(comps)

    def _next_block(self) -> tuple:
        while True:
            a, b = _unpair(self._bt - 1)
            self._bt += 1
            k, q = a + 1, b + 1
            if k <= self.i + 1:
                break
        block = polynomial_at(q) * k
        return tuple([block] * k + [Polynomial.zero()] * (self.i + 1 - k))


_S_FAMILIES: dict = {}


def s_family(params: ConstructionParams, i: int) -> STupleFamily:
    key = (params, i)
    fam = _S_FAMILIES.get(key)
    if fam is None:
        fam = _S_FAMILIES[key] = STupleFamily(params, i)
    return fam


def enumerate_S(params: ConstructionParams, i: int, n: int) -> tuple:
    """n-th tuple of the length-(i+1) family, caps taken from `params`."""
    return s_family(params, i).tuple_at(n)


def _triangle_split(n: int) -> tuple:
    j = (math.isqrt(8 * n + 1) - 1) // 2
    a = n - j * (j + 1) // 2
    return a, j - a


def q_sequence(params: ConstructionParams, n: int) -> tuple:
    """n-th tuple of the diagonal-merged enumeration of all families."""
    if n < 0:
        raise ValueError("index must be >= 0")
    a, s = _triangle_split(n)
    return s_family(params, a).tuple_at(s)


def _default_params(p: int) -> ConstructionParams:
    return ConstructionParams(p=p, scheme="pow5")


def admissible_for_p(p: int, n: int, params: ConstructionParams | None = None) -> Polynomial:
    """Component p-2 of the merged tuple enumeration at index n."""
    if p < 2:
        raise ValueError("p must be >= 2")
    if n < 0:
        raise ValueError("index must be >= 0")
    if params is None:
        params = _default_params(p)
    a, s = _triangle_split(n)
    comp = p - 2
    if comp > a:
        return Polynomial.zero()
    if s <= params.b(a + 1):
        return Polynomial.zero()
    return s_family(params, a).tuple_at(s)[comp]


def verify_claim(p: int, params: ConstructionParams | None = None) -> bool:
    """Exact all-zero check of the protected prefix for one block index.

    The enumeration guarantees that the first 2p + 1 polynomials of
    the p-th component sequence vanish; this recomputes them.
    """
    if p < 2:
        raise ValueError("p must be >= 2 for the protected-prefix check")
    return all(admissible_for_p(p, j, params).is_zero for j in range(2 * p + 1))


def locate_polynomial(
    params: ConstructionParams,
    target: Polynomial,
    component: int = 0,
    max_steps: int = 200_000,
) -> dict:
    """Constructive surjectivity witness for a single polynomial.

    Scans the shortest family containing `component` until the tuple
    equal to `target` at that component (zero elsewhere) is emitted.
    Returns the family index, the subscript, and the merged index.
    """
    if target.is_zero:
        raise ValueError("locate a nonzero polynomial; zeros are everywhere")
    i = component
    fam = s_family(params, i)
    want = list(fam.zero_tuple())
    want[component] = target
    want = tuple(want)
    for s in range(fam.prefix_end + 1, fam.prefix_end + 1 + max_steps):
        if fam.tuple_at(s) == want:
            return {"i": i, "s": s, "q_index": _pair_triangle(i, s)}
    raise GrassdynError("polynomial locator exceeded its step budget")


def _pair_triangle(i: int, s: int) -> int:
    level = i + s
    return level * (level + 1) // 2 + i


def locate_repetition(
    params: ConstructionParams,
    target: Polynomial,
    scale: int,
    max_steps: int = 200_000,
) -> dict:
    """Find the block `scale * target` repeated `scale` times, then zeros."""
    if target.is_zero:
        raise ValueError("repetition blocks carry nonzero polynomials")
    if scale < 1:
        raise ValueError("scale must be >= 1")
    i = scale - 1
    fam = s_family(params, i)
    block = target * scale
    want = tuple([block] * scale)
    for s in range(fam.prefix_end + 1, fam.prefix_end + 1 + max_steps):
        if fam.tuple_at(s) == want:
            return {
                "i": i,
                "s": s,
                "q_index": _pair_triangle(i, s),
                "scale": scale,
                "multiplicity": scale,
            }
    raise GrassdynError("repetition locator exceeded its step budget")


def repetition_block_certificate(
    params: ConstructionParams,
    target: Polynomial,
    scale: int,
    p_max: int = 6,
) -> dict:
    """Exact deviation certificate at a repetition block.

    At the located merged index n, every in-block component equals
    ``scale * target`` exactly, so by the defining relation the
    1/scale-scaled b_n-th power of each block, applied to its cyclic
    vector, differs from the target image by exactly e_{b_n}/scale.
    Aggregated over blocks p = 2..p_max of the direct sum (block
    vectors weighted 1/p), the squared deviation is an exact rational;
    it shrinks as the scale grows.
    """
    loc = locate_repetition(params, target, scale)
    n = loc["q_index"]
    for c in range(scale):
        got = admissible_for_p(c + 2, n, params)
        if got != target * scale:
            raise GrassdynError("repetition block mismatch at the located index")
    deviation_sq = sum(
        (Fraction(1, (scale * p) ** 2) for p in range(2, p_max + 1)), Fraction(0)
    )
    return {
        "q_index": n,
        "scale": scale,
        "in_block_components": scale,
        "per_block_deviation": Fraction(1, scale),
        "aggregate_deviation_sq": deviation_sq,
        "p_max": p_max,
    }


# -- admissible sequences ---------------------------------------------------


class ClassicAdmissible:
    """Single-stream enumeration of all rational polynomials under caps.

    The n-th polynomial is the queue head if it fits the n-th cap,
    else zero (the head waits). Index 0 is always zero.
    """

    source = "classic"

    def __init__(self, params: ConstructionParams):
        self.params = params
        self._polys = [Polynomial.zero()]
        self._q = 1
        self._pending = None

    def polynomial(self, n: int) -> Polynomial:
        if n < 0:
            raise ValueError("index must be >= 0")
        while len(self._polys) <= n:
            self._advance()
        return self._polys[n]

    def _advance(self):
        n = len(self._polys)
        cap = control_value(self.params, n)
        if self._pending is None:
            self._pending = polynomial_at(self._q)
            self._q += 1
        if self._pending.degree < cap and self._pending.l1 <= cap:
            self._polys.append(self._pending)
            self._pending = None
        else:
            self._polys.append(Polynomial.zero())

    def locate(self, target: Polynomial, max_steps: int = 200_000) -> int:
        if target.is_zero:
            return 0
        for n in range(max_steps):
            if self.polynomial(n) == target:
                return n
        raise GrassdynError("classic locator exceeded its step budget")


class Section43Admissible:
    """Per-block view of the merged tuple enumeration."""

    source = "section43"

    def __init__(self, params: ConstructionParams):
        self.params = params

    def polynomial(self, n: int) -> Polynomial:
        return admissible_for_p(self.params.p, n, self.params)

    def locate(self, target: Polynomial, max_steps: int = 200_000) -> int:
        loc = locate_polynomial(self.params, target, component=self.params.p - 2, max_steps=max_steps)
        return loc["q_index"]


_ADMISSIBLE_CACHE: dict = {}


def admissible_sequence(params: ConstructionParams):
    seq = _ADMISSIBLE_CACHE.get(params)
    if seq is None:
        cls = ClassicAdmissible if params.admissible_source == "classic" else Section43Admissible
        seq = _ADMISSIBLE_CACHE[params] = cls(params)
    return seq


def admissible_polynomial(params: ConstructionParams, n: int) -> Polynomial:
    """The n-th perturbation polynomial, overrides applied first."""
    override = params.override_map
    if n in override:
        return override[n]
    if n == 0:
        return Polynomial.zero()
    return admissible_sequence(params).polynomial(n)


# -- exact orbit coordinates -------------------------------------------------

_WEIGHT_PREFIX: dict = {}


def weight_product(params: ConstructionParams, lo: int, hi: int):
    """High-precision product of weights lo..hi (empty product is 1)."""
    if hi < lo:
        return mpmath.mpf(1)
    if lo < 1:
        raise ValueError("weights start at index 1")
    with mpmath.workprec(params.precision_bits):
        prefix = _WEIGHT_PREFIX.setdefault(params.precision_bits, [mpmath.mpf(1)])
        while len(prefix) <= hi:
            prefix.append(prefix[-1] * _weight_mpf(len(prefix)))
        return prefix[hi] / prefix[lo - 1]


def _to_mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _acc(d: dict, k: int, v):
    cur = d.get(k)
    if cur is None:
        d[k] = v
        return
    if isinstance(cur, Fraction) and isinstance(v, Fraction):
        out = cur + v
    else:
        out = _to_mpf(cur) + _to_mpf(v)
    if isinstance(out, Fraction) and out == 0:
        del d[k]
    else:
        d[k] = out


_COORDS_CACHE: dict = {}


def _jump_below(params: ConstructionParams, j: int) -> int:
    n = 0
    while params.b(n + 1) <= j:
        n += 1
    return n


def _coords_entry(params: ConstructionParams, j: int, memo: list) -> dict:
    if j == 0 and params.b(0) > 0:
        return {0: Fraction(1)}
    n = _jump_below(params, j)
    bn = params.b(n)
    u = j - bn
    poly = admissible_polynomial(params, n)
    if not poly.is_zero and poly.degree >= bn:
        raise GrassdynError("non-ambiguity condition violated")
    entry: dict = {}
    if u == 0:
        entry[bn] = Fraction(1)
    else:
        entry[j] = weight_product(params, bn + 1, j)
    for e, c in enumerate(poly.coeffs):
        if c == 0:
            continue
        for idx, val in memo[e + u].items():
            _acc(entry, idx, c * val if isinstance(val, Fraction) else _to_mpf(c) * val)
    return entry


def _coords_upto(params: ConstructionParams, i: int) -> list:
    if i > params.memo_cap:
        raise TruncationError(
            f"orbit coordinate index {i} exceeds the memo cap {params.memo_cap}"
        )
    memo = _COORDS_CACHE.setdefault(params, [])
    if len(memo) > i:
        return memo
    with mpmath.workprec(params.precision_bits):
        for j in range(len(memo), i + 1):
            memo.append(_coords_entry(params, j, memo))
    return memo


def orbit_vector_coords(params: ConstructionParams, i: int) -> Vector:
    """Coordinates of the i-th orbit vector of the cyclic vector.

    Computed by the triangular recursion: between jump indices the
    operator is a pure weighted shift; at a jump index the defining
    relation substitutes the polynomial image plus one basis vector.
    The coordinate on the j-th basis vector vanishes for j > i, and at
    every jump index the coordinate on e_{b_n} is exactly one.
    """
    if i < 0:
        raise ValueError("orbit index must be >= 0")
    memo = _coords_upto(params, i)
    return Vector(i + 1, dict(memo[i]))


def _poly_orbit_expansion(params: ConstructionParams, poly: Polynomial) -> dict:
    out: dict = {}
    if poly.is_zero:
        return out
    memo = _coords_upto(params, poly.degree)
    for e, c in enumerate(poly.coeffs):
        if c == 0:
            continue
        for idx, val in memo[e].items():
            _acc(out, idx, c * val if isinstance(val, Fraction) else _to_mpf(c) * val)
    return out


def _l1_hp(coords: Mapping[int, object]):
    total = mpmath.mpf(0)
    for v in coords.values():
        total += abs(_to_mpf(v))
    return total


def epsilon_f(params: ConstructionParams, n: int, dim: int | None = None) -> tuple:
    """Column-replacement data at the n-th jump index.

    Returns (eps_n, f_n): eps_n is the reciprocal weight product over
    the open run between consecutive jump indices; f_n is eps_n times
    the difference between the current polynomial image and the
    shifted previous one, assembled from exact orbit coordinates.
    """
    if n < 1:
        raise ValueError("jump position must be >= 1")
    with mpmath.workprec(params.precision_bits):
        b_prev, b_cur = params.b(n - 1), params.b(n)
        eps = 1 / weight_product(params, b_prev + 1, b_cur - 1)
        p_cur = admissible_polynomial(params, n)
        p_prev = admissible_polynomial(params, n - 1)
        if p_cur.is_zero and p_prev.is_zero:
            return eps, Vector(dim if dim else 1, {})
        needed = max(p_cur.degree, b_cur - b_prev + p_prev.degree)
        if needed > params.memo_cap:
            raise TruncationError(
                f"perturbation at n={n} needs orbit coordinates up to {needed}, "
                f"beyond the memo cap {params.memo_cap}"
            )
        coords = _poly_orbit_expansion(params, p_cur)
        for idx, val in _poly_orbit_expansion(params, p_prev.shift(b_cur - b_prev)).items():
            _acc(coords, idx, -val if isinstance(val, Fraction) else -_to_mpf(val))
        f_coords = {idx: eps * _to_mpf(val) for idx, val in coords.items()}
        support_top = max(f_coords, default=0)
        if dim is None:
            dim = support_top + 1
        elif support_top >= dim:
            raise TruncationError(
                f"perturbation vector at n={n} has support {support_top}, dim {dim}"
            )
        return eps, Vector(dim, f_coords)


def check_f_bound(params: ConstructionParams, n: int) -> dict:
    """One perturbation-size check: exact-support norm against the bound.

    Verifies the hypothesis chain first (every earlier perturbation
    must already satisfy the unit bound), then evaluates both sides at
    the record's precision.
    """
    if n < 1:
        raise ValueError("jump position must be >= 1")
    with mpmath.workprec(params.precision_bits):
        for k in range(1, n):
            _, f_k = epsilon_f(params, k)
            if not _l1_hp(f_k.coords) <= 1:
                raise GrassdynError(
                    f"bound hypothesis unverified: perturbation at k={k} exceeds one"
                )
        eps, f_vec = epsilon_f(params, n)
        lhs = _l1_hp(f_vec.coords)
        p_cur = admissible_polynomial(params, n)
        p_prev = admissible_polynomial(params, n - 1)
        b_prev = params.b(n - 1)
        c = mpmath.mpf(params.c_constant)
        rhs = mpmath.power(4, max(p_cur.degree, p_prev.degree) + 1) * (
            _to_mpf(p_cur.l1) * pow2_neg(b_prev)
            + _to_mpf(p_prev.l1) * exp_neg(c * mpmath.sqrt(b_prev))
        )
        return {
            "n": n,
            "b_n": params.b(n),
            "eps": eps,
            "lhs": lhs,
            "rhs": rhs,
            "passed": bool(lhs <= rhs),
        }


# -- the operator ------------------------------------------------------------


class PerturbedForwardShift(Operator):
    """Weighted forward shift with jump-index columns replaced.

    Column b_n - 1 maps its basis vector to eps_n e_{b_n} + f_n; every
    other column is the plain weighted forward shift. Under the
    pow2p1 scheme the zeroth column is weight-free (the defining
    relation at the zeroth jump index). Matrix entries are float; the
    high-precision column action is available via apply_hp.
    """

    def __init__(self, params: ConstructionParams, dim: int):
        b1 = params.b(1)
        if dim < b1 + 1:
            raise ConfigError(f"dim {dim} is below the first jump index + 1 = {b1 + 1}")
        self.params = params
        self.dim = dim
        self._jumps: dict = {}
        n = 1
        while params.b(n) <= dim:
            self._jumps[params.b(n) - 1] = n
            n += 1
        for n_jump in self._jumps.values():
            poly = admissible_polynomial(params, n_jump)
            if not poly.is_zero and poly.degree >= params.b(n_jump) - 1:
                raise GrassdynError("non-ambiguity condition violated")
        self._pert_cache: dict = {}

    def _perturbation(self, n: int) -> tuple:
        if n not in self._pert_cache:
            self._pert_cache[n] = epsilon_f(self.params, n)
        return self._pert_cache[n]

    def _column_entries(self, i: int) -> list:
        """Float column action of basis vector i, possibly past the edge."""
        if i == 0 and self.params.scheme == "pow2p1":
            return [(1, 1.0)]
        if i in self._jumps:
            n = self._jumps[i]
            eps, f_vec = self._perturbation(n)
            entries = [(self.params.b(n), float(eps))]
            entries.extend((j, float(v)) for j, v in sorted(f_vec.coords.items()))
            return entries
        return [(i + 1, weight(i + 1))]

    def apply_with_loss(self, v):
        self._check_dim(v)
        out: dict = {}
        lost = 0.0
        for i, x in v.coords.items():
            for j, c in self._column_entries(i):
                if j < self.dim:
                    out[j] = out.get(j, 0.0) + c * float(x)
                else:
                    lost += abs(c * float(x))
        return Vector(self.dim, out), lost

    def _matrix(self):
        import numpy as np

        mat = np.zeros((self.dim, self.dim))
        for i in range(self.dim):
            for j, c in self._column_entries(i):
                if j < self.dim:
                    mat[j, i] = c
        return mat

    def leak_row(self):
        import numpy as np

        row = np.zeros(self.dim)
        edge = self.dim - 1
        for j, c in self._column_entries(edge):
            if j >= self.dim:
                row[edge] += abs(c)
        return row

    def apply_hp(self, coords: Mapping[int, object]) -> dict:
        """High-precision column action on a sparse coordinate dict.

        Raises MassLossError if any image coordinate would land past
        the truncation edge; use a large enough dim for exact checks.
        """
        with mpmath.workprec(self.params.precision_bits):
            out: dict = {}
            for i, x in coords.items():
                if i == 0 and self.params.scheme == "pow2p1":
                    _acc(out, 1, x if isinstance(x, Fraction) else _to_mpf(x))
                    continue
                if i in self._jumps:
                    n = self._jumps[i]
                    eps, f_vec = self._perturbation(n)
                    bn = self.params.b(n)
                    if bn >= self.dim:
                        raise MassLossError(
                            f"jump image at {bn} escapes the truncation {self.dim}"
                        )
                    _acc(out, bn, eps * _to_mpf(x))
                    for j, v in f_vec.coords.items():
                        _acc(out, j, _to_mpf(v) * _to_mpf(x))
                    continue
                if i + 1 >= self.dim:
                    raise MassLossError(
                        f"shift image at {i + 1} escapes the truncation {self.dim}"
                    )
                _acc(out, i + 1, _weight_mpf(i + 1) * _to_mpf(x))
            return out

    def to_json(self):
        return {
            "variant": "perturbed-forward-shift",
            "dim": self.dim,
            "params": self.params.to_json(),
        }


def build_operator(params: ConstructionParams, dim: int) -> PerturbedForwardShift:
    """Construct the truncated perturbed shift; validates non-ambiguity."""
    return PerturbedForwardShift(params, dim)


def defining_relation_check(params: ConstructionParams, n: int, tolerance: float = CLOSURE_TOLERANCE) -> dict:
    """Iterate the operator's columns b_n times and compare coordinates.

    The iterated image of the cyclic vector must reproduce the closed
    recursion's coordinates within `tolerance` relative (l2 over the
    support). Intermediate coefficients reach weight products of size
    4^{b_n} and cancel almost completely at the jump, so the working
    precision is raised with b_n; the stated precision alone would
    drown the comparison in roundoff.
    """
    if n < 0:
        raise ValueError("jump position must be >= 0")
    bn = params.b(n)
    boosted = replace(
        params, precision_bits=max(params.precision_bits, 3 * bn + 128)
    )
    op = build_operator(boosted, max(bn + 2, params.b(1) + 1))
    coords: dict = {0: Fraction(1)}
    for _ in range(bn):
        coords = op.apply_hp(coords)
    expected = orbit_vector_coords(boosted, bn).coords
    with mpmath.workprec(boosted.precision_bits):
        keys = set(coords) | set(expected)
        num = mpmath.mpf(0)
        den = mpmath.mpf(0)
        for k in keys:
            a = _to_mpf(coords.get(k, 0))
            b = _to_mpf(expected.get(k, 0))
            num += (a - b) ** 2
            den += b ** 2
        rel = mpmath.sqrt(num) / mpmath.sqrt(den)
        return {
            "n": n,
            "b_n": bn,
            "relative_error": float(rel),
            "passed": bool(rel <= tolerance),
        }


def build_direct_sum(p_max: int, dim_per_block: int) -> tuple:
    """Blocks for p = 2..p_max plus the candidate cyclic direct-sum vector.

    Every block uses the pow5 scheme with its per-p component of the
    merged enumeration; the vector carries e_0/p in block p.
    """
    if p_max < 2:
        raise ValueError("p_max must be >= 2")
    blocks = []
    vec_blocks = []
    for p in range(2, p_max + 1):
        params = ConstructionParams(p=p, scheme="pow5")
        blocks.append(build_operator(params, dim_per_block))
        vec_blocks.append(Vector(dim_per_block, {0: Fraction(1, p)}))
    return DirectSum(blocks), DirectSumVector(vec_blocks)
