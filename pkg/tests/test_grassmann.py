"""Tests for frames, the quotient map, and the gap metric."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grassdyn.errors import (
    DimensionDropError,
    DimensionMismatchError,
    RankDeficiencyError,
)
from grassdyn.grassmann import (
    Subspace,
    grassmann_distance,
    perturb_to_independent,
    pi_n,
    push_forward,
    sphere_deviation,
)
from grassdyn.space import Vector

TOLERANCE = 1e-9
# acos conditioning near a zero gap turns 1e-16 frame noise into ~1e-8.
NEAR_ZERO_GAP = 1e-7


def test_pi_n_rejects_dependent_tuples():
    v = Vector(4, {0: 1.0, 1: 2.0})
    with pytest.raises(RankDeficiencyError):
        pi_n([v, v.scale(3.0)])
    with pytest.raises(RankDeficiencyError):
        pi_n([Vector(2, {0: 1.0}), Vector(2, {1: 1.0}), Vector(2, {0: 1.0, 1: 1.0})])


def test_pi_n_depends_only_on_span():
    a = Vector(5, {0: 1.0, 2: 1.0})
    b = Vector(5, {1: 1.0, 4: -1.0})
    s1 = pi_n([a, b])
    s2 = pi_n([a.add(b), b.scale(-2.0)])
    assert grassmann_distance(s1, s2) < NEAR_ZERO_GAP


def test_gap_metric_axioms_on_coordinate_planes():
    e01 = Subspace.coordinate_span(4, [0, 1])
    e23 = Subspace.coordinate_span(4, [2, 3])
    e02 = Subspace.coordinate_span(4, [0, 2])
    assert grassmann_distance(e01, e01) == pytest.approx(0.0, abs=TOLERANCE)
    assert grassmann_distance(e01, e23) == pytest.approx(math.pi / 2)
    assert grassmann_distance(e01, e02) == pytest.approx(math.pi / 2)


def test_gap_metric_known_rotation_angle():
    theta = 0.3
    rotated = pi_n(np.array([[math.cos(theta)], [math.sin(theta)]]))
    e0 = Subspace.coordinate_span(2, [0])
    assert grassmann_distance(e0, rotated) == pytest.approx(theta, abs=1e-12)


def test_distance_requires_matching_shapes():
    with pytest.raises(DimensionMismatchError):
        grassmann_distance(Subspace.coordinate_span(3, [0]), Subspace.coordinate_span(4, [0]))
    with pytest.raises(DimensionMismatchError):
        grassmann_distance(
            Subspace.coordinate_span(4, [0]), Subspace.coordinate_span(4, [0, 1])
        )


def test_perturb_to_independent_keeps_budget_and_fixes_rank():
    v = Vector(6, {0: 1.0})
    out = perturb_to_independent([v, v], eps=1e-3, seed=5)
    pi_n(out)
    for w in out:
        delta = w.add(v.scale(-1.0))
        assert np.linalg.norm(delta.to_dense()) <= 1e-3 + 1e-15


def test_perturb_leaves_independent_tuples_alone():
    tup = [Vector(3, {0: 1.0}), Vector(3, {1: 1.0})]
    assert perturb_to_independent(tup, eps=0.5, seed=0) == tup


def test_push_forward_matches_matrix_image():
    mat = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 2.0], [0.0, 0.0, 0.0]])
    sub = Subspace.coordinate_span(3, [1, 2])
    img = push_forward(mat, sub)
    expected = pi_n(np.array([[1.0, 0.0], [0.0, 2.0], [0.0, 0.0]]))
    assert grassmann_distance(img, expected) < TOLERANCE


def test_push_forward_detects_dimension_drop():
    mat = np.diag([1.0, 0.0, 1.0])
    sub = Subspace.coordinate_span(3, [0, 1])
    with pytest.raises(DimensionDropError):
        push_forward(mat, sub)


def test_sphere_deviation_zero_for_same_space_and_sqrt2_for_orthogonal():
    a = Subspace.coordinate_span(4, [0, 1])
    b = Subspace.coordinate_span(4, [2, 3])
    assert sphere_deviation(a, a, samples=50, seed=3) < TOLERANCE
    assert sphere_deviation(a, b, samples=50, seed=3) == pytest.approx(math.sqrt(2.0))


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=40, deadline=None)
def test_gap_symmetry_on_random_pairs(seed):
    rng = np.random.default_rng(seed)
    a = pi_n(rng.standard_normal((5, 2)))
    b = pi_n(rng.standard_normal((5, 2)))
    d_ab = grassmann_distance(a, b)
    d_ba = grassmann_distance(b, a)
    assert abs(d_ab - d_ba) < TOLERANCE
    assert -TOLERANCE <= d_ab <= math.pi / 2 + TOLERANCE


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_gap_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    subs = [pi_n(rng.standard_normal((6, 2))) for _ in range(3)]
    d01 = grassmann_distance(subs[0], subs[1])
    d12 = grassmann_distance(subs[1], subs[2])
    d02 = grassmann_distance(subs[0], subs[2])
    assert d02 <= d01 + d12 + 1e-8
