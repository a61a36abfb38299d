"""Backend agreement tests: compiled orbit kernels versus the numpy fallback."""

from __future__ import annotations

import numpy as np
import pytest

from grassdyn import _orbit_py, kernels

AGREEMENT_TOL = 1e-10


def _random_problem(seed, dim=8, n=2):
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((dim, dim)) * 0.6
    frame, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    target, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    return mat, frame, target


def test_backend_reports_a_name():
    assert kernels.backend_name() in ("compiled", "python")


def test_dispatch_prefers_reference_path_past_crossover():
    small = np.zeros((8, 8))
    big = np.zeros((kernels.DENSE_CROSSOVER_DIM + 1,) * 2)
    if kernels.backend_name() == "compiled":
        assert kernels._compilable(small)
    assert not kernels._compilable(big)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_subspace_orbit_backends_agree(seed):
    if kernels.backend_name() != "compiled":
        pytest.skip("compiled backend unavailable")
    mat, frame, target = _random_problem(seed)
    d_fast, c_fast, s_fast = kernels.subspace_orbit(mat, frame, target, 40)
    d_ref, c_ref, s_ref = _orbit_py.subspace_orbit(mat, frame, target, 40)
    assert s_fast == s_ref
    assert c_fast == c_ref
    assert np.allclose(d_fast, d_ref, atol=AGREEMENT_TOL)


@pytest.mark.parametrize("seed", [10, 11, 12])
def test_vector_orbit_backends_agree(seed):
    if kernels.backend_name() != "compiled":
        pytest.skip("compiled backend unavailable")
    rng = np.random.default_rng(seed)
    dim = 7
    mat = rng.standard_normal((dim, dim)) * 0.5
    x = rng.standard_normal(dim)
    target = rng.standard_normal(dim)
    leak = np.zeros(dim)
    d_fast, c_fast, s_fast = kernels.vector_orbit(mat, x, target, 50, leak, 1e-9)
    d_ref, c_ref, s_ref = _orbit_py.vector_orbit(mat, x, target, 50, leak, 1e-9)
    assert (s_fast, c_fast) == (s_ref, c_ref)
    assert np.allclose(d_fast, d_ref, atol=AGREEMENT_TOL)


@pytest.mark.parametrize("seed", [20, 21, 22])
def test_projective_orbit_backends_agree(seed):
    if kernels.backend_name() != "compiled":
        pytest.skip("compiled backend unavailable")
    rng = np.random.default_rng(seed)
    dim = 6
    mat = rng.standard_normal((dim, dim))
    x = rng.standard_normal(dim)
    t = rng.standard_normal(dim)
    t = t / np.linalg.norm(t)
    d_fast, c_fast, s_fast = kernels.projective_orbit(mat, x, t, 30)
    d_ref, c_ref, s_ref = _orbit_py.projective_orbit(mat, x, t, 30)
    assert (s_fast, c_fast) == (s_ref, c_ref)
    assert np.allclose(d_fast, d_ref, atol=AGREEMENT_TOL)


def test_collapse_status_agrees_between_backends():
    mat = np.diag([1.0, 0.0, 1.0])
    frame = np.zeros((3, 2))
    frame[0, 0] = 1.0
    frame[1, 1] = 1.0
    target = np.eye(3)[:, :2]
    d_ref, c_ref, s_ref = _orbit_py.subspace_orbit(mat, frame, target, 5)
    assert s_ref == kernels.STATUS_COLLAPSE
    assert c_ref == 0
    d_any, c_any, s_any = kernels.subspace_orbit(mat, frame, target, 5)
    assert s_any == s_ref
    assert c_any == c_ref
    assert np.allclose(np.asarray(d_any), np.asarray(d_ref), atol=AGREEMENT_TOL)


def test_leak_status_from_forward_shift_row():
    dim = 4
    mat = np.zeros((dim, dim))
    for i in range(dim - 1):
        mat[i + 1, i] = 1.0
    leak = np.zeros(dim)
    leak[dim - 1] = 1.0
    x = np.zeros(dim)
    x[dim - 1] = 1.0
    target = np.zeros(dim)
    dists, completed, status = kernels.vector_orbit(mat, x, target, 5, leak, 1e-9)
    assert status == kernels.STATUS_LEAK
    assert completed == 0


def test_complex_input_falls_back_to_python_path():
    mat = np.eye(3, dtype=complex) * 1j
    frame = np.eye(3)[:, :1].astype(complex)
    target = np.eye(3)[:, :1].astype(complex)
    dists, completed, status = kernels.subspace_orbit(mat, frame, target, 3)
    assert status == kernels.STATUS_OK
    assert np.allclose(dists, 0.0, atol=AGREEMENT_TOL)
