# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled orbit kernels (float64).

Algorithm-identical to grassdyn._orbit_py; see that module for the
contract. Complex inputs are handled by the Python backend only.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport acos, fabs, sqrt

cnp.import_array()

STATUS_OK = 0
STATUS_COLLAPSE = 1
STATUS_LEAK = 2

cdef double COLLAPSE_TOL = 1e-12


cdef void _matmul_cols(double[:, ::1] mat, double[:, ::1] src, double[:, ::1] dst) noexcept:
    cdef Py_ssize_t n = mat.shape[0]
    cdef Py_ssize_t m = src.shape[1]
    cdef Py_ssize_t i, j, l
    cdef double acc
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for l in range(n):
                acc += mat[i, l] * src[l, j]
            dst[i, j] = acc


cdef bint _orthonormalize(double[:, ::1] frame) noexcept:
    cdef Py_ssize_t rows = frame.shape[0]
    cdef Py_ssize_t cols = frame.shape[1]
    cdef Py_ssize_t i, j, r, p
    cdef double scale = 0.0, nj, dot
    for j in range(cols):
        nj = 0.0
        for r in range(rows):
            nj += frame[r, j] * frame[r, j]
        nj = sqrt(nj)
        if nj > scale:
            scale = nj
    if scale == 0.0:
        return 0
    for j in range(cols):
        for p in range(2):
            for i in range(j):
                dot = 0.0
                for r in range(rows):
                    dot += frame[r, i] * frame[r, j]
                for r in range(rows):
                    frame[r, j] -= dot * frame[r, i]
        nj = 0.0
        for r in range(rows):
            nj += frame[r, j] * frame[r, j]
        nj = sqrt(nj)
        if nj <= COLLAPSE_TOL * scale:
            return 0
        for r in range(rows):
            frame[r, j] /= nj
    return 1


cdef double _smallest_singular_value(double[:, ::1] g, double[:, ::1] work) noexcept:
    """One-sided Jacobi on a small square matrix; returns sigma_min."""
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t i, j, r, sweep
    cdef double a, b, c, zeta, t, cs, sn, tmp, smin
    for i in range(n):
        for j in range(n):
            work[i, j] = g[i, j]
    for sweep in range(30):
        c = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                a = 0.0
                b = 0.0
                tmp = 0.0
                for r in range(n):
                    a += work[r, i] * work[r, i]
                    b += work[r, j] * work[r, j]
                    tmp += work[r, i] * work[r, j]
                if fabs(tmp) > c:
                    c = fabs(tmp)
                if fabs(tmp) <= 1e-15 * sqrt(a * b) or tmp == 0.0:
                    continue
                zeta = (b - a) / (2.0 * tmp)
                if zeta >= 0.0:
                    t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
                else:
                    t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
                cs = 1.0 / sqrt(1.0 + t * t)
                sn = cs * t
                for r in range(n):
                    tmp = work[r, i]
                    work[r, i] = cs * tmp - sn * work[r, j]
                    work[r, j] = sn * tmp + cs * work[r, j]
        if c <= 1e-15:
            break
    smin = -1.0
    for j in range(n):
        a = 0.0
        for r in range(n):
            a += work[r, j] * work[r, j]
        a = sqrt(a)
        if smin < 0.0 or a < smin:
            smin = a
    return smin


cdef double _gap_distance(double[:, ::1] target, double[:, ::1] frame,
                          double[:, ::1] g, double[:, ::1] work) noexcept:
    cdef Py_ssize_t rows = frame.shape[0]
    cdef Py_ssize_t n = frame.shape[1]
    cdef Py_ssize_t i, j, r
    cdef double acc, smin
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for r in range(rows):
                acc += target[r, i] * frame[r, j]
            g[i, j] = acc
    smin = _smallest_singular_value(g, work)
    if smin > 1.0:
        smin = 1.0
    if smin < 0.0:
        smin = 0.0
    return acos(smin)


def subspace_orbit(double[:, ::1] mat, double[:, ::1] frame, double[:, ::1] target, int kmax):
    cdef Py_ssize_t rows = frame.shape[0]
    cdef Py_ssize_t n = frame.shape[1]
    cdef cnp.ndarray[double, ndim=1] dists = np.empty(kmax + 1, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] cur_arr = np.array(frame, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=2] nxt_arr = np.empty((rows, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] g = np.empty((n, n), dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] work = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] cur = cur_arr
    cdef double[:, ::1] nxt = nxt_arr
    cdef double[:, ::1] gv = g
    cdef double[:, ::1] wv = work
    cdef double[::1] dv = dists
    cdef int k, completed = 0
    cdef Py_ssize_t i, j
    dv[0] = _gap_distance(target, cur, gv, wv)
    for k in range(1, kmax + 1):
        _matmul_cols(mat, cur, nxt)
        for i in range(rows):
            for j in range(n):
                cur[i, j] = nxt[i, j]
        if not _orthonormalize(cur):
            return dists[: completed + 1], completed, STATUS_COLLAPSE
        dv[k] = _gap_distance(target, cur, gv, wv)
        completed = k
    return dists, completed, STATUS_OK


def vector_orbit(double[:, ::1] mat, double[::1] x, double[::1] target, int kmax,
                 double[::1] leak_row, double leak_tol):
    cdef Py_ssize_t n = mat.shape[0]
    cdef cnp.ndarray[double, ndim=1] dists = np.empty(kmax + 1, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cur_arr = np.array(x, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] nxt_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] dv = dists
    cdef bint has_leak = 0
    cdef double acc, lost, norm
    cdef int k, completed = 0
    cdef Py_ssize_t i, l
    for i in range(n):
        if leak_row[i] != 0.0:
            has_leak = 1
            break
    acc = 0.0
    for i in range(n):
        acc += (cur[i] - target[i]) * (cur[i] - target[i])
    dv[0] = sqrt(acc)
    for k in range(1, kmax + 1):
        lost = 0.0
        if has_leak:
            for i in range(n):
                lost += leak_row[i] * fabs(cur[i])
        for i in range(n):
            acc = 0.0
            for l in range(n):
                acc += mat[i, l] * cur[l]
            nxt[i] = acc
        norm = 0.0
        for i in range(n):
            cur[i] = nxt[i]
            norm += nxt[i] * nxt[i]
        if lost > leak_tol * sqrt(norm):
            return dists[: completed + 1], completed, STATUS_LEAK
        acc = 0.0
        for i in range(n):
            acc += (cur[i] - target[i]) * (cur[i] - target[i])
        dv[k] = sqrt(acc)
        completed = k
    return dists, completed, STATUS_OK


def projective_orbit(double[:, ::1] mat, double[::1] x, double[::1] target_unit, int kmax):
    cdef Py_ssize_t n = mat.shape[0]
    cdef cnp.ndarray[double, ndim=1] dists = np.empty(kmax + 1, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] cur_arr = np.array(x, dtype=np.float64, copy=True)
    cdef cnp.ndarray[double, ndim=1] nxt_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] cur = cur_arr
    cdef double[::1] nxt = nxt_arr
    cdef double[::1] dv = dists
    cdef double norm, dot, acc
    cdef int k, completed = -1
    cdef Py_ssize_t i, l
    for k in range(kmax + 1):
        if k > 0:
            for i in range(n):
                acc = 0.0
                for l in range(n):
                    acc += mat[i, l] * cur[l]
                nxt[i] = acc
            for i in range(n):
                cur[i] = nxt[i]
        norm = 0.0
        dot = 0.0
        for i in range(n):
            norm += cur[i] * cur[i]
            dot += cur[i] * target_unit[i]
        norm = sqrt(norm)
        if norm == 0.0:
            return dists[: completed + 1], completed, STATUS_COLLAPSE
        dot = fabs(dot) / norm
        if dot > 1.0:
            dot = 1.0
        dv[k] = acos(dot)
        completed = k
    return dists, completed, STATUS_OK
