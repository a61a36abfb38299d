"""Tests for the jump-index construction: enumeration, controls, the operator."""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grassdyn.construction import (
    ConstructionParams,
    PerturbedForwardShift,
    Polynomial,
    admissible_for_p,
    admissible_polynomial,
    build_direct_sum,
    build_operator,
    check_f_bound,
    controlled_by,
    defining_relation_check,
    derive_control_sequence,
    enumerate_S,
    epsilon_f,
    index_b,
    locate_polynomial,
    locate_repetition,
    polynomial_at,
    polynomial_index,
    q_sequence,
    rational_at,
    rational_index,
    repetition_block_certificate,
    verify_claim,
    weight,
)
from grassdyn.errors import ConfigError, GrassdynError, MassLossError, TruncationError
from grassdyn.space import Vector, l1_norm

TOLERANCE = 1e-10

X = Polynomial([0, 1])
HALF = Fraction(1, 2)


def params_for(scheme="pow5", p=2, **kw):
    kw.setdefault("admissible_source", "classic")
    return ConstructionParams(p=p, scheme=scheme, **kw)


# -- polynomials -------------------------------------------------------------


def test_polynomial_normalization_and_degree():
    assert Polynomial([0, 0]).is_zero
    assert Polynomial([0, 0]).degree == -1
    assert Polynomial([1, 2, 0]).degree == 1
    assert Polynomial.x_power(3).degree == 3


def test_polynomial_arithmetic_and_l1():
    p = Polynomial([1, -2])
    q = Polynomial([0, 1, 3])
    assert (p + q) == Polynomial([1, -1, 3])
    assert (p * q) == Polynomial([0, 1, 1, -6])
    assert p.l1 == 3
    assert (p - p).is_zero


def test_polynomial_shift_and_evaluate():
    p = Polynomial([1, 1])
    assert p.shift(2) == Polynomial([0, 0, 1, 1])
    assert p.evaluate(Fraction(3)) == 4


def test_polynomial_string_codec_round_trip():
    p = Polynomial([HALF, 0, Fraction(-7, 3)])
    assert Polynomial.from_strings(p.to_strings()) == p


# -- jump indices and weights -------------------------------------------------


def test_jump_indices_for_both_schemes():
    assert [index_b(n, "pow2p1", 2) for n in range(4)] == [1, 5, 25, 125]
    assert [index_b(n, "pow2p1", 3) for n in range(4)] == [1, 7, 49, 343]
    assert [index_b(n, "pow5", 2) for n in range(4)] == [0, 5, 25, 125]


def test_weights_live_in_two_four():
    assert weight(1) == 2.0
    for n in range(1, 200):
        assert 2.0 <= weight(n) < 4.0
    assert weight(100) == pytest.approx(4.0 * (1 - 1 / (2 * 10.0)))


# -- control sequences --------------------------------------------------------


def test_control_sequence_frozen_values_both_schemes():
    for scheme in ("pow2p1", "pow5"):
        params = params_for(scheme)
        assert derive_control_sequence(params, 6) == [0, 0, 1, 1, 2, 4, 10]


def test_control_sequence_nondecreasing_and_eventually_positive():
    params = params_for("pow5")
    seq = derive_control_sequence(params, 10)
    assert all(a <= b for a, b in zip(seq, seq[1:]))
    assert seq[-1] >= 1


def test_explicit_controls_respected():
    params = params_for(
        "pow5", control_mode="explicit", explicit_controls=(0, 0, 1, 1, 2)
    )
    assert derive_control_sequence(params, 4) == [0, 0, 1, 1, 2]


def test_controlled_by_strict_degree_and_l1():
    controls = [0, 0, 1, 2]
    # degree must be strictly below the cap; l1 must be at most the cap.
    fits = [Polynomial.zero(), Polynomial.zero(), Polynomial([1]), Polynomial([1, 1])]
    assert controlled_by(fits.__getitem__, controls, 3)
    too_deep = list(fits)
    too_deep[2] = Polynomial([0, 1])
    assert not controlled_by(too_deep.__getitem__, controls, 3)
    too_heavy = list(fits)
    too_heavy[3] = Polynomial([2, 1])
    assert not controlled_by(too_heavy.__getitem__, controls, 3)


# -- rational and polynomial enumerations --------------------------------------


def test_rational_enumeration_head():
    head = [rational_at(j) for j in range(5)]
    assert head[0] == 0
    assert len(set(head)) == 5


@given(st.integers(min_value=0, max_value=5000))
@settings(max_examples=200, deadline=None)
def test_rational_round_trip(j):
    assert rational_index(rational_at(j)) == j


@given(
    st.integers(min_value=-(10**4), max_value=10**4),
    st.integers(min_value=1, max_value=10**4),
)
@settings(max_examples=200, deadline=None)
def test_rational_surjectivity(num, den):
    q = Fraction(num, den)
    assert rational_at(rational_index(q)) == q


def test_rational_index_refuses_astronomical_paths():
    with pytest.raises(ValueError):
        rational_index(Fraction(10**9))


@given(st.integers(min_value=0, max_value=20000))
@settings(max_examples=200, deadline=None)
def test_polynomial_round_trip(qidx):
    assert polynomial_index(polynomial_at(qidx)) == qidx


def test_polynomial_enumeration_hits_named_target():
    assert polynomial_index(Polynomial([1, HALF])) == 54
    assert polynomial_at(54) == Polynomial([1, HALF])


# -- tuple families and the merged sequence ------------------------------------


def test_family_prefix_is_all_zero_tuples():
    params = params_for("pow5")
    for i in range(3):
        zero = tuple([Polynomial.zero()] * (i + 1))
        top = params.b(i + 1)
        for s in (0, 1, top):
            assert enumerate_S(params, i, s) == zero


def test_family_tuples_have_fixed_length():
    params = params_for("pow5")
    for i in range(4):
        for s in range(0, 40, 7):
            assert len(enumerate_S(params, i, s)) == i + 1


def test_merged_sequence_triangle_layout():
    params = params_for("pow5")
    assert q_sequence(params, 0) == enumerate_S(params, 0, 0)
    assert q_sequence(params, 1) == enumerate_S(params, 0, 1)
    assert q_sequence(params, 2) == enumerate_S(params, 1, 0)
    assert q_sequence(params, 5) == enumerate_S(params, 2, 0)


def test_components_controlled_along_merged_sequence():
    # caps are nondecreasing, so the family cap at subscript s also
    # controls the merged index n >= s.
    params = params_for("pow5")
    controls = derive_control_sequence(params, 60)
    for p in (2, 3):
        assert controlled_by(
            lambda n, p=p: admissible_for_p(p, n, params), controls, 60
        )


def test_protected_prefix_and_claim():
    for p in range(2, 17):
        assert verify_claim(p)


def test_section43_first_nonzero_entries_for_p2():
    params = ConstructionParams(p=2, scheme="pow5", admissible_source="section43")
    nonzero = {
        n: admissible_for_p(2, n, params)
        for n in range(50)
        if not admissible_for_p(2, n, params).is_zero
    }
    assert nonzero == {
        21: Polynomial.one(),
        28: Polynomial.one(),
        36: X,
        45: X,
    }


def test_locate_polynomial_witness():
    params = params_for("pow5")
    loc = locate_polynomial(params, Polynomial([1, HALF]))
    assert loc == {"i": 0, "s": 112, "q_index": 6328}
    got = q_sequence(params, loc["q_index"])
    assert got == (Polynomial([1, HALF]),)


def test_locate_repetition_blocks():
    params = params_for("pow5")
    loc2 = locate_repetition(params, Polynomial.one(), 2)
    assert (loc2["i"], loc2["s"], loc2["q_index"]) == (1, 29, 466)
    assert q_sequence(params, 466) == (Polynomial([2]), Polynomial([2]))
    loc3 = locate_repetition(params, Polynomial.one(), 3)
    assert (loc3["i"], loc3["s"], loc3["q_index"]) == (2, 133, 9182)


def test_repetition_certificate_exact_deviations():
    params = params_for("pow5")
    cert = repetition_block_certificate(params, Polynomial.one(), 2, p_max=3)
    assert cert["per_block_deviation"] == HALF
    assert cert["aggregate_deviation_sq"] == Fraction(1, 16) + Fraction(1, 36)
    cert3 = repetition_block_certificate(params, Polynomial.one(), 3, p_max=3)
    assert cert3["per_block_deviation"] < cert["per_block_deviation"]


# -- admissible sequences -------------------------------------------------------


def test_classic_admissible_head():
    params = params_for("pow5")
    head = [admissible_polynomial(params, n) for n in range(6)]
    assert head == [
        Polynomial.zero(),
        Polynomial.zero(),
        Polynomial.one(),
        Polynomial.zero(),
        X,
        Polynomial([-1]),
    ]


def test_admissible_overrides_win():
    target = Polynomial([3])
    params = params_for("pow5", overrides=((2, target),))
    assert admissible_polynomial(params, 2) == target
    assert admissible_polynomial(params, 4) == X


def test_params_json_round_trip():
    params = params_for(
        "pow2p1",
        p=3,
        overrides=((1, Polynomial([0, HALF])),),
        control_mode="explicit",
        explicit_controls=(0, 1, 1),
        precision_bits=320,
    )
    back = ConstructionParams.from_json(params.to_json())
    assert back == params


# -- epsilon and the perturbation ------------------------------------------------


def test_epsilon_oracle_values():
    with mpmath.workprec(256):
        w = [4.0 * (1 - 1 / (2 * math.sqrt(t))) for t in range(1, 5)]
        eps_pow2p1, _ = epsilon_f(params_for("pow2p1"), 1)
        assert float(eps_pow2p1) == pytest.approx(1 / (w[1] * w[2] * w[3]), rel=1e-12)
        eps_pow5, _ = epsilon_f(params_for("pow5"), 1)
        assert float(eps_pow5) == pytest.approx(
            1 / (w[0] * w[1] * w[2] * w[3]), rel=1e-12
        )


def test_f_bound_chain_passes_small_indices():
    for scheme in ("pow2p1", "pow5"):
        params = params_for(scheme, memo_cap=4000)
        for n in range(1, 5):
            rec = check_f_bound(params, n)
            assert rec["passed"], rec
            assert float(rec["lhs"]) <= 1.0


def test_f_vector_exactness_zero_polynomials():
    # while both neighbors are zero the replacement column is pure eps.
    params = params_for("pow5")
    eps, f = epsilon_f(params, 1)
    assert f.coords == {}
    assert 0 < float(eps) < 1


def test_truncation_error_beyond_memo_cap():
    params = params_for("pow5", memo_cap=16)
    with pytest.raises(TruncationError):
        epsilon_f(params, 3)


# -- the operator -----------------------------------------------------------------


def test_operator_dim_guard():
    with pytest.raises(ConfigError):
        build_operator(params_for("pow5"), 4)


def test_operator_matrix_structure():
    params = params_for("pow2p1")
    op = build_operator(params, 12)
    mat = op.matrix()
    # weight-free zeroth column under pow2p1
    assert mat[1, 0] == 1.0
    # plain weighted columns elsewhere below the first jump
    assert mat[2, 1] == pytest.approx(weight(2))
    # the jump column at b_1 - 1 = 4 sends e_4 to eps e_5 (P's are zero here)
    eps, _ = epsilon_f(params, 1)
    assert mat[5, 4] == pytest.approx(float(eps))
    assert mat[6, 5] == pytest.approx(weight(6))


def test_operator_apply_matches_matrix():
    params = params_for("pow5")
    op = build_operator(params, 30)
    v = Vector(30, {0: 1.0, 4: 2.0, 24: -1.0})
    dense = op.matrix() @ v.to_dense()
    out, lost = op.apply_with_loss(v)
    assert lost == 0.0
    for i, x in enumerate(dense):
        assert out.to_dense()[i] == pytest.approx(x, abs=1e-12)


def test_operator_leak_row_reports_edge():
    params = params_for("pow5")
    op = build_operator(params, 12)
    row = op.leak_row()
    assert row[11] == pytest.approx(weight(12))
    assert sum(row[:11]) == 0.0


def test_apply_hp_refuses_silent_mass_loss():
    params = params_for("pow5")
    op = build_operator(params, 6)
    with pytest.raises(MassLossError):
        op.apply_hp({5: Fraction(1)})


def test_operator_json_round_trip():
    from grassdyn.operators import operator_from_json

    params = params_for("pow2p1", memo_cap=800)
    op = build_operator(params, 30)
    back = operator_from_json(op.to_json())
    assert isinstance(back, PerturbedForwardShift)
    assert back.dim == op.dim
    assert back.params == params


def test_non_ambiguity_violation_rejected():
    bad = params_for("pow5", overrides=((1, Polynomial.x_power(5)),))
    with pytest.raises(GrassdynError):
        build_operator(bad, 30)


# -- the defining relation ----------------------------------------------------------


@pytest.mark.parametrize("scheme", ["pow2p1", "pow5"])
def test_defining_relation_small_jumps(scheme):
    params = params_for(scheme, memo_cap=4000)
    for n in range(4):
        rec = defining_relation_check(params, n)
        assert rec["passed"], rec


def test_defining_relation_detects_corruption():
    params = params_for("pow5", overrides=((2, Polynomial([7])),))
    op = build_operator(params, 30)
    honest = params_for("pow5")
    coords = {0: Fraction(1)}
    for _ in range(25):
        coords = op.apply_hp(coords)
    from grassdyn.construction import orbit_vector_coords

    expected = orbit_vector_coords(honest, 25).coords
    diff = 0.0
    for k in set(coords) | set(expected):
        diff = max(diff, abs(float(coords.get(k, 0)) - float(expected.get(k, 0))))
    assert diff > 1e-3


# -- direct sums ----------------------------------------------------------------------


def test_direct_sum_shape_and_cyclic_vector():
    ds, vec = build_direct_sum(4, 30)
    assert len(ds.blocks) == 3
    assert ds.dim == 90
    assert [b.coords for b in vec.blocks] == [
        {0: Fraction(1, 2)},
        {0: Fraction(1, 3)},
        {0: Fraction(1, 4)},
    ]
    out, lost = ds.apply_with_loss(vec)
    assert lost == 0.0
    assert len(out.blocks) == 3


def test_l1_norm_of_f_vectors_exactish():
    params = params_for("pow5", memo_cap=4000)
    _, f2 = epsilon_f(params, 2)
    assert float(l1_norm(Vector(f2.dim, {i: float(v) for i, v in f2.coords.items()}))) < 1.0
