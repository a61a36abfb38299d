"""Tests for the truncated operator catalog and the spectrum layer."""

from __future__ import annotations

import math

import numpy as np
import pytest

from grassdyn.errors import SpectrumUnsupportedError, TruncationError
from grassdyn.operators import (
    AdjointMultiplication,
    Annulus,
    BackwardShift,
    Diagonal,
    DirectSum,
    Disk,
    ForwardShift,
    Point,
    Scaled,
    analytic_spectrum,
    circle_intersects_all_components,
    mixing_commutation_check,
    operator_from_json,
    operator_norm_estimate,
    radial_intersection,
)
from grassdyn.space import DirectSumVector, Vector

TOLERANCE = 1e-12


def test_backward_shift_action_and_no_leak():
    b = BackwardShift(4, [0.0, 2.0, 3.0, 4.0])
    out, lost = b.apply_with_loss(Vector(4, {0: 1.0, 1: 1.0, 3: 2.0}))
    assert lost == 0.0
    assert out.coords == {0: 2.0, 2: 8.0}
    assert np.all(b.leak_row() == 0.0)


def test_forward_shift_reports_edge_loss():
    f = ForwardShift(3, [2.0, 2.0, 5.0])
    out, lost = f.apply_with_loss(Vector(3, {1: 1.0, 2: 1.0}))
    assert out.coords == {2: 2.0}
    assert lost == pytest.approx(5.0)
    assert f.leak_row().tolist() == [0.0, 0.0, 5.0]


def test_adjoint_multiplication_matches_matrix():
    op = AdjointMultiplication(0.5, 5)
    v = Vector(5, {0: 1.0, 2: -1.0, 4: 2.0})
    dense = op.matrix() @ v.to_dense()
    assert np.allclose(op.apply(v).to_dense(), dense)


def test_matrix_cap_guard():
    with pytest.raises(TruncationError):
        BackwardShift(5000).matrix()


def test_direct_sum_flat_and_block_agree():
    ds = DirectSum([Diagonal([2.0, 3.0]), BackwardShift(3)])
    flat = Vector(5, {0: 1.0, 1: 1.0, 3: 1.0})
    block = DirectSumVector([Vector(2, {0: 1.0, 1: 1.0}), Vector(3, {1: 1.0})])
    out_flat, _ = ds.apply_with_loss(flat)
    out_block, _ = ds.apply_with_loss(block)
    assert out_flat == out_block.flatten()


def test_json_codec_round_trip_every_variant():
    ops = [
        Diagonal([1.0, 2.0, 1j]),
        BackwardShift(4, [0.0, 1.0, 2.0, 3.0]),
        ForwardShift(3),
        AdjointMultiplication(1 + 1j, 4),
        Scaled(2.0, BackwardShift(3)),
        DirectSum([Diagonal([1.0]), ForwardShift(2)]),
    ]
    v_sizes = [3, 4, 3, 4, 3, 3]
    for op, k in zip(ops, v_sizes):
        back = operator_from_json(op.to_json())
        assert back.dim == op.dim
        x = Vector(op.dim, {min(k - 1, op.dim - 1): 1.0, 0: 0.5})
        assert np.allclose(back.matrix(), op.matrix())
        assert back.apply(x) == op.apply(x)


def test_norm_estimate_is_lower_bound_and_converges_for_diagonal():
    d = Diagonal([0.5, -3.0, 1.0])
    est = operator_norm_estimate(d, iters=200, seed=1)
    assert est <= 3.0 + TOLERANCE
    assert est == pytest.approx(3.0, abs=1e-9)


def test_analytic_spectrum_diagonal_dedups_points():
    desc = analytic_spectrum(Diagonal([1.0, 2.0, 1.0]))
    assert desc.components == (Point(1.0), Point(2.0))


def test_analytic_spectrum_adjoint_multiplication_disk():
    desc = analytic_spectrum(AdjointMultiplication(1.0, 8))
    assert desc.components == (Disk(1.0, 1.0),)
    assert radial_intersection(desc) == (0.0, 2.0)


def test_analytic_spectrum_scaled_and_direct_sum():
    op = Scaled(2.0, DirectSum([Diagonal([1.0]), AdjointMultiplication(0.0, 4)]))
    desc = analytic_spectrum(op)
    assert Point(2.0) in desc.components
    assert Disk(0.0, 2.0) in desc.components


def test_analytic_spectrum_refuses_shifts():
    with pytest.raises(SpectrumUnsupportedError):
        analytic_spectrum(BackwardShift(4))


def test_two_far_points_admit_no_common_circle():
    desc = analytic_spectrum(Diagonal([1.0, 2.0]))
    assert radial_intersection(desc) is None
    assert not circle_intersects_all_components(desc, 1.0)
    assert not circle_intersects_all_components(desc, 1.5)


def test_annulus_radial_interval_cases():
    assert Annulus(0.0, 1.0, 2.0).radial_interval() == (1.0, 2.0)
    lo, hi = Annulus(3.0, 1.0, 2.0).radial_interval()
    assert lo == pytest.approx(1.0)
    assert hi == pytest.approx(5.0)


def test_circle_meets_unit_circle_of_point_family():
    desc = analytic_spectrum(Diagonal([1.0, 1j, -1.0]))
    assert circle_intersects_all_components(desc, 1.0)
    assert not circle_intersects_all_components(desc, 0.5)
    with pytest.raises(ValueError):
        circle_intersects_all_components(desc, -1.0)


def test_mixing_commutation_holds_for_linear_action():
    op = BackwardShift(5, [0.0, 1.5, 2.0, 2.5, 3.0])
    vecs = [Vector(5, {i: 1.0, (i + 2) % 5: -0.5}) for i in range(3)]
    mix = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]])
    check = mixing_commutation_check(op, vecs, mix, k=3)
    assert check.passed
    assert check.max_deviation <= 1e-10


def test_mixing_check_rejects_singular_matrix():
    op = Diagonal([1.0, 2.0])
    vecs = [Vector(2, {0: 1.0}), Vector(2, {1: 1.0})]
    with pytest.raises(ValueError):
        mixing_commutation_check(op, vecs, np.ones((2, 2)))
