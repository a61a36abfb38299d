"""Reference orbit kernels (numpy).

These are the fallback implementations behind grassdyn.kernels. The
compiled twin in _orbit_cy.pyx follows the same algorithms step for
step (modified Gram-Schmidt with two passes, cosine clamping, the same
collapse test) so both backends agree to floating-point noise.

Returned tuples use a `completed` count: distances[0..completed] are
valid; `status` is 0 for a full run, 1 for rank collapse / kernel hit,
2 for a truncation-leak abort.
"""

from __future__ import annotations

import math

import numpy as np

COLLAPSE_TOL = 1e-12

STATUS_OK = 0
STATUS_COLLAPSE = 1
STATUS_LEAK = 2


def _orthonormalize(frame):
    """Two-pass MGS in place; returns False on rank collapse."""
    n = frame.shape[1]
    scale = 0.0
    for j in range(n):
        scale = max(scale, np.linalg.norm(frame[:, j]))
    if scale == 0.0:
        return False
    for j in range(n):
        for _ in range(2):
            for i in range(j):
                frame[:, j] -= np.vdot(frame[:, i], frame[:, j]) * frame[:, i]
        nj = np.linalg.norm(frame[:, j])
        if nj <= COLLAPSE_TOL * scale:
            return False
        frame[:, j] /= nj
    return True


def _largest_principal_angle(target, frame):
    g = target.conj().T @ frame
    s = np.linalg.svd(g, compute_uv=False)
    smin = float(s[-1])
    smin = min(1.0, max(0.0, smin))
    return math.acos(smin)


def subspace_orbit(mat, frame, target, kmax):
    """Iterate a frame under `mat`, recording gap distances to `target`.

    Parameters are dense arrays; `frame` and `target` have orthonormal
    columns. Returns (distances, completed, status).
    """
    mat = np.asarray(mat)
    cur = np.array(frame, copy=True)
    target = np.asarray(target)
    dists = np.empty(kmax + 1)
    dists[0] = _largest_principal_angle(target, cur)
    completed = 0
    for k in range(1, kmax + 1):
        cur = mat @ cur
        if not _orthonormalize(cur):
            return dists[: completed + 1], completed, STATUS_COLLAPSE
        dists[k] = _largest_principal_angle(target, cur)
        completed = k
    return dists, completed, STATUS_OK


def vector_orbit(mat, x, target, kmax, leak_row, leak_tol):
    """Raw vector orbit with distances to `target` and a leak guard.

    The step from x_k to x_{k+1} aborts when the truncation leak
    estimate exceeds `leak_tol` times the post-step norm.
    """
    mat = np.asarray(mat)
    cur = np.array(x, copy=True)
    target = np.asarray(target)
    leak_row = np.asarray(leak_row)
    has_leak = bool(np.any(leak_row != 0.0))
    dists = np.empty(kmax + 1)
    dists[0] = float(np.linalg.norm(cur - target))
    completed = 0
    for k in range(1, kmax + 1):
        lost = float(leak_row @ np.abs(cur)) if has_leak else 0.0
        cur = mat @ cur
        if lost > leak_tol * float(np.linalg.norm(cur)):
            return dists[: completed + 1], completed, STATUS_LEAK
        dists[k] = float(np.linalg.norm(cur - target))
        completed = k
    return dists, completed, STATUS_OK


def projective_orbit(mat, x, target_unit, kmax):
    """Line orbit: angles between the normalized iterate and a unit target."""
    mat = np.asarray(mat)
    cur = np.array(x, copy=True)
    t = np.asarray(target_unit)
    dists = np.empty(kmax + 1)
    completed = -1
    for k in range(0, kmax + 1):
        if k > 0:
            cur = mat @ cur
        norm = float(np.linalg.norm(cur))
        if norm == 0.0:
            return dists[: completed + 1], completed, STATUS_COLLAPSE
        c = abs(complex(np.vdot(cur, t))) / norm
        dists[k] = math.acos(min(1.0, max(0.0, c)))
        completed = k
    return dists, completed, STATUS_OK
