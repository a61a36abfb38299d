"""Tests for the sparse truncated-space vector layer."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grassdyn.errors import DimensionMismatchError
from grassdyn.space import DirectSumVector, Vector, l1_norm, l2_norm, sample_vector

TOLERANCE = 1e-12


def test_zero_pruning_and_support():
    v = Vector(5, {0: 1.0, 2: 0.0, 4: -3.0})
    assert v.support() == [0, 4]
    assert 2 not in v.coords


def test_index_bounds_rejected():
    with pytest.raises(DimensionMismatchError):
        Vector(3, {3: 1.0})
    with pytest.raises(DimensionMismatchError):
        Vector(3, {-1: 1.0})


def test_dim_must_be_positive():
    with pytest.raises(ValueError):
        Vector(0)


def test_basis_and_from_dense_round_trip():
    e2 = Vector.basis(6, 2)
    assert e2.to_dense().tolist() == [0, 0, 1, 0, 0, 0]
    arr = np.array([0.0, 1.5, 0.0, -2.0])
    v = Vector.from_dense(arr)
    assert v.dim == 4
    assert np.allclose(v.to_dense(), arr)


def test_add_and_scale_exact_cancellation():
    v = Vector(4, {1: Fraction(1, 3)})
    w = Vector(4, {1: Fraction(-1, 3), 2: Fraction(2)})
    s = v.add(w)
    assert s.support() == [2]
    assert s.coords[2] == Fraction(2)
    assert v.scale(Fraction(3)).coords[1] == Fraction(1)


def test_add_dim_mismatch():
    with pytest.raises(DimensionMismatchError):
        Vector(3).add(Vector(4))


def test_norms_exact_versus_float():
    v = Vector(4, {0: Fraction(1, 2), 3: Fraction(-1, 2)})
    assert l1_norm(v) == Fraction(1)
    assert isinstance(l1_norm(v), Fraction)
    w = Vector(4, {0: 0.5, 3: -0.5})
    assert isinstance(l1_norm(w), float)
    assert abs(l2_norm(w) - np.sqrt(0.5)) < TOLERANCE


def test_json_round_trip_with_complex():
    v = Vector(5, {1: 2.0, 3: 1 + 2j})
    back = Vector.from_json(v.to_json())
    assert back == v


def test_direct_sum_flatten_and_norms():
    d = DirectSumVector([Vector(2, {0: 3.0}), Vector(3, {2: 4.0})])
    assert d.dim == 5
    flat = d.flatten()
    assert flat.coords == {0: 3.0, 4: 4.0}
    assert l1_norm(d) == pytest.approx(7.0)
    assert l2_norm(d) == pytest.approx(5.0)
    assert DirectSumVector.from_json(d.to_json()) == d


def test_sample_vector_deterministic_and_supported():
    a = sample_vector(10, (2, 5), 7)
    b = sample_vector(10, (2, 5), 7)
    assert a == b
    assert set(a.support()) <= {2, 3, 4}
    assert a.support()


def test_sample_vector_rejects_empty_or_out_of_range_support():
    with pytest.raises(ValueError):
        sample_vector(10, (), 0)
    with pytest.raises(DimensionMismatchError):
        sample_vector(4, (0, 9), 0)


@given(
    st.integers(min_value=1, max_value=12),
    st.dictionaries(st.integers(min_value=0, max_value=11), st.fractions(), max_size=6),
    st.dictionaries(st.integers(min_value=0, max_value=11), st.fractions(), max_size=6),
)
@settings(max_examples=100, deadline=None)
def test_l1_triangle_inequality_exact(dim, ca, cb):
    ca = {i: x for i, x in ca.items() if i < dim}
    cb = {i: x for i, x in cb.items() if i < dim}
    a = Vector(dim, ca)
    b = Vector(dim, cb)
    assert l1_norm(a.add(b)) <= l1_norm(a) + l1_norm(b)
