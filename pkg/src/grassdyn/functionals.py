"""Exact linear functionals on the polynomial orbit of the cyclic vector.

One functional per base index delta: it is one at T^delta e0, zero
elsewhere on the base window, and defined by a substitution recursion
on two windows above each jump index. Values are exact rationals.
The module also carries the product on the polynomial orbit model,
the two-factor y-values with their vanishing and size bounds, partial
summability sums, and the hypothesis-verification report behind the
non-strong-h-supercyclicity criterion.

The report is a desk-scale certificate, not a proof: summability is
evidenced by partial-sum decay up to a cap, never concluded.
"""

from __future__ import annotations

from fractions import Fraction

import mpmath

from .construction import (
    ConstructionParams,
    Polynomial,
    _jump_below,
    _to_mpf,
    admissible_polynomial,
    controlled_by,
    derive_control_sequence,
    weight_product,
)
from .errors import ConfigError, GrassdynError, SchemeInconsistencyError, TruncationError

__all__ = [
    "FunctionalTable",
    "base_offset",
    "phi_value",
    "phi_on_polynomial",
    "model_product",
    "phi_kronecker_check",
    "y_value",
    "m_l_bound",
    "summability_partial",
    "criterion_report",
]

DEFAULT_TABLE_CAP = 4000
DEFAULT_TAIL_THRESHOLD = 1e-3


def base_offset(params: ConstructionParams) -> int:
    """Minimal m with b_{m-1} < 2p < b_m; the base window is [0, b_m)."""
    two_p = 2 * params.p
    m = 1
    while not (params.b(m - 1) < two_p < params.b(m)):
        m += 1
        if m > 64:
            raise SchemeInconsistencyError(
                "no base-window offset: 2p collides with every jump index"
            )
    return m


class FunctionalTable:
    """Memoized exact values of one base-index functional.

    phi(T^i e0) is 1 at i = delta, 0 elsewhere on the base window
    [0, b_m), substituted through the jump polynomial on the two
    windows above each jump index, and 0 in the gaps. The memo is
    append-only; tables for distinct delta are independent.

    `cap` bounds the support indices reachable through
    summability_partial, not the recursion itself.
    """

    def __init__(self, params: ConstructionParams, delta: int, cap: int = DEFAULT_TABLE_CAP):
        self.params = params
        self.m = base_offset(params)
        self.base_top = params.b(self.m)
        if not 0 <= delta < self.base_top:
            raise ConfigError(
                f"delta {delta} outside the base window [0, {self.base_top})"
            )
        self.delta = delta
        self.cap = cap
        self._memo: dict = {}
        self._factors: list = []


def phi_value(table: FunctionalTable, i: int) -> Fraction:
    """Exact value of the functional at the i-th orbit power.

    Case order: i = delta gives 1; the rest of the base window gives
    0; i in [b_n, 3 b_n / 2) or [2 b_n, 5 b_n / 2) substitutes the
    jump polynomial shifted by i - b_n (support strictly descends,
    which terminates the recursion); anything else gives 0.
    """
    if i < 0:
        raise ValueError("support index must be >= 0")
    memo = table._memo
    val = memo.get(i)
    if val is None:
        val = _phi_eval(table, i)
        memo[i] = val
    return val


def _phi_eval(table: FunctionalTable, i: int) -> Fraction:
    if i == table.delta:
        return Fraction(1)
    if i < table.base_top:
        return Fraction(0)
    params = table.params
    n = _jump_below(params, i)
    bn = params.b(n)
    if 2 * i < 3 * bn or (i >= 2 * bn and 2 * i < 5 * bn):
        poly = admissible_polynomial(params, n)
        if poly.is_zero:
            return Fraction(0)
        shifted = poly.shift(i - bn)
        if shifted.degree >= i:
            raise GrassdynError("functional recursion failed to descend")
        return phi_on_polynomial(table, shifted)
    return Fraction(0)


def phi_on_polynomial(table: FunctionalTable, poly: Polynomial) -> Fraction:
    """Linear extension of the functional to the polynomial orbit model."""
    total = Fraction(0)
    for e, c in enumerate(poly.coeffs):
        if c != 0:
            total += c * phi_value(table, e)
    return total


def model_product(p: Polynomial, q: Polynomial) -> Polynomial:
    """Product on the orbit model: images of P and Q multiply to PQ."""
    return p * q


def phi_kronecker_check(params: ConstructionParams) -> bool:
    """Exact Kronecker audit of the whole functional family.

    Checks phi_delta(T^i e0) = [i = delta] for all delta and i in the
    required window: 0..2p-1 under pow2p1 (the first jump index 2p+1
    clears the window), 0..b_m-1 under pow5 with the offset m.
    """
    if params.scheme == "pow2p1":
        top = 2 * params.p
    else:
        top = params.b(base_offset(params))
    for delta in range(top):
        table = FunctionalTable(params, delta)
        for i in range(top):
            if phi_value(table, i) != (1 if i == delta else 0):
                return False
    return True


def _jump_factor(params: ConstructionParams, k: int) -> Polynomial:
    return Polynomial.x_power(params.b(k)) - admissible_polynomial(params, k)


def y_value(table: FunctionalTable, k: int, u: int, l: int, v: int) -> Fraction:
    """Functional value on the two-factor product at offsets (u, v).

    The product is (T^{b_k} - P_k)(T^{b_l} - P_l) T^{u+v} applied to
    the cyclic vector, expanded exactly.
    """
    params = table.params
    if not 0 <= k <= l:
        raise ValueError("need 0 <= k <= l")
    if not 0 <= u < params.b(k + 1) - params.b(k):
        raise ValueError("u must lie in the k-th jump gap")
    if not 0 <= v < params.b(l + 1) - params.b(l):
        raise ValueError("v must lie in the l-th jump gap")
    y = (_jump_factor(params, k) * _jump_factor(params, l)).shift(u + v)
    return phi_on_polynomial(table, y)


def m_l_bound(params: ConstructionParams, l: int) -> Fraction:
    """Exact size bound dominating |y_value| at level l."""
    if l < 0:
        raise ValueError("level must be >= 0")
    head = max(
        (1 + admissible_polynomial(params, j).l1) ** 2 for j in range(l + 1)
    )
    tail = Fraction(1)
    for j in range(1, l + 2):
        tail *= max(Fraction(1), admissible_polynomial(params, j).l1) ** 2
    return head * tail


def _basis_factor(table: FunctionalTable, r: int) -> tuple:
    """Polynomial and weight scalar with e_r = (poly image) / scalar."""
    params = table.params
    if params.scheme == "pow2p1" and r == 0:
        return Polynomial.one(), mpmath.mpf(1)
    k = _jump_below(params, r)
    bk = params.b(k)
    poly = _jump_factor(params, k).shift(r - bk)
    return poly, weight_product(params, bk + 1, r)


def summability_partial(table: FunctionalTable, R: int):
    """Partial sum of |phi| over pairwise basis products up to index R.

    Each product e_r e_q is an exact polynomial image divided by a
    weight product at least 2^{u+v}; the phi values are exact and the
    scalars are high-precision floats. Monotone nondecreasing in R.
    """
    if R < 0:
        raise ValueError("R must be >= 0")
    if 2 * R > table.cap:
        raise TruncationError(
            f"summability at R={R} reaches support index {2 * R}, "
            f"beyond the table cap {table.cap}"
        )
    params = table.params
    with mpmath.workprec(params.precision_bits):
        factors = table._factors
        while len(factors) <= R:
            poly, w = _basis_factor(table, len(factors))
            # sparse view: the factors have at most deg(P) + 2 terms
            items = [(e, c) for e, c in enumerate(poly.coeffs) if c != 0]
            factors.append((w, items))
        total = mpmath.mpf(0)
        for r in range(R + 1):
            wr, items_r = factors[r]
            for q in range(r, R + 1):
                wq, items_q = factors[q]
                val = Fraction(0)
                for e1, c1 in items_r:
                    for e2, c2 in items_q:
                        val += c1 * c2 * phi_value(table, e1 + e2)
                if val == 0:
                    continue
                term = abs(_to_mpf(val)) / (wr * wq)
                total += term if q == r else 2 * term
        return total


def criterion_report(
    params: ConstructionParams,
    *,
    r_lo: int = 200,
    r_hi: int = 300,
    tail_threshold: float = DEFAULT_TAIL_THRESHOLD,
    struct_depth: int = 4,
    cap: int = DEFAULT_TABLE_CAP,
) -> dict:
    """Desk-scale hypothesis certificate for each h in 2..p.

    Structure checks (exact): the protected prefix of the merged
    enumeration vanishes, jump polynomial degrees stay below a third
    of their jump index, and the derived caps control the sequence.
    Per h: the Kronecker property of the 2h forms (exact) and the
    partial-sum increment from r_lo to r_hi for each of them
    (numerical decay evidence). Any failed exact check marks the
    instance invalid. The auxiliary sum and sum-with-doubled-tail
    forms are listed with spot evaluations on the low orbit powers.
    """
    prefix_ok = True
    if params.admissible_source == "section43":
        prefix_ok = all(
            admissible_polynomial(params, j).is_zero for j in range(2 * params.p + 1)
        )
    degree_ok = all(
        3 * admissible_polynomial(params, n).degree < params.b(n)
        for n in range(1, struct_depth + 1)
    )
    controls = derive_control_sequence(params, struct_depth)
    control_ok = controlled_by(
        lambda n: admissible_polynomial(params, n), controls, struct_depth
    )
    structure_pass = bool(prefix_ok and degree_ok and control_ok)

    deltas = range(2 * params.p)
    tables = {delta: FunctionalTable(params, delta, cap=cap) for delta in deltas}
    if params.scheme == "pow2p1":
        window = 2 * params.p
    else:
        window = params.b(base_offset(params))
    kron_ok = {
        delta: all(
            phi_value(tables[delta], i) == (1 if i == delta else 0)
            for i in range(window)
        )
        for delta in deltas
    }
    tails = {}
    for delta in deltas:
        lo = summability_partial(tables[delta], r_lo)
        hi = summability_partial(tables[delta], r_hi)
        tails[delta] = float(hi - lo)

    blocks = []
    for h in range(2, params.p + 1):
        kron = all(kron_ok[delta] for delta in range(2 * h))
        tail = max(tails[delta] for delta in range(2 * h))
        ok = structure_pass and kron and tail < tail_threshold
        verdict = (
            f"criterion hypotheses verified at desk scale for h={h}"
            if ok
            else "invalid"
        )
        aux = []
        spots = range(2 * h)
        for i in range(h):
            for j in range(h):
                psi = [
                    phi_value(tables[i], a) + phi_value(tables[h + j], a)
                    for a in spots
                ]
                psi_tilde = [
                    phi_value(tables[i], a) + 2 * phi_value(tables[h + j], a)
                    for a in spots
                ]
                aux.append(
                    {
                        "i": i,
                        "j": j,
                        "sum_form": [f"{x.numerator}/{x.denominator}" for x in psi],
                        "doubled_form": [
                            f"{x.numerator}/{x.denominator}" for x in psi_tilde
                        ],
                    }
                )
        blocks.append(
            {
                "h": h,
                "kronecker_pass": bool(kron),
                "summability_tail": tail,
                "verdict": verdict,
                "auxiliary_forms": aux,
            }
        )

    return {
        "scheme": params.scheme,
        "p": params.p,
        "structure_pass": structure_pass,
        "blocks": blocks,
        "valid": bool(structure_pass and all(b["verdict"] != "invalid" for b in blocks)),
    }
