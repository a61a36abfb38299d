"""Finite-dimensional Grassmannian: frames, the quotient map, the gap metric.

A subspace is stored as an orthonormal frame (columns). The quotient map
pi_n sends an independent n-tuple of vectors to its span and refuses
numerically dependent input. Distance is the gap metric: the largest
principal angle, in [0, pi/2].
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionDropError, DimensionMismatchError, RankDeficiencyError
from .space import Vector
from ._util import as_generator

__all__ = [
    "RANK_TOL",
    "Subspace",
    "pi_n",
    "perturb_to_independent",
    "grassmann_distance",
    "push_forward",
    "sphere_deviation",
]

# Relative singular-value floor below which a tuple counts as dependent.
RANK_TOL = 1e-10


def _as_columns(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        m = np.asarray(vectors)
        if m.ndim != 2:
            raise DimensionMismatchError("frame array must be 2-d (columns are vectors)")
        return m
    cols = []
    dim = None
    for v in vectors:
        arr = v.to_dense() if isinstance(v, Vector) else np.asarray(v)
        if dim is None:
            dim = len(arr)
        elif len(arr) != dim:
            raise DimensionMismatchError("tuple vectors have mixed dimensions")
        cols.append(arr)
    if not cols:
        raise ValueError("empty tuple")
    dtype = complex if any(np.iscomplexobj(c) for c in cols) else float
    return np.stack([c.astype(dtype) for c in cols], axis=1)


class Subspace:
    """An n-dimensional subspace of K^dim held as an orthonormal frame."""

    __slots__ = ("frame",)

    def __init__(self, frame: np.ndarray):
        frame = np.asarray(frame)
        if frame.ndim != 2 or frame.shape[1] == 0:
            raise DimensionMismatchError("frame must be a nonempty 2-d array")
        gram = frame.conj().T @ frame
        if not np.allclose(gram, np.eye(frame.shape[1]), atol=1e-10):
            raise ValueError("frame columns are not orthonormal; use pi_n")
        self.frame = frame

    @property
    def dim(self) -> int:
        return self.frame.shape[0]

    @property
    def n(self) -> int:
        return self.frame.shape[1]

    @classmethod
    def coordinate_span(cls, dim: int, indices: Sequence[int]) -> "Subspace":
        frame = np.zeros((dim, len(indices)))
        for j, i in enumerate(indices):
            frame[i, j] = 1.0
        return cls(frame)

    def project(self, z: np.ndarray) -> np.ndarray:
        return self.frame @ (self.frame.conj().T @ z)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, n={self.n})"


def pi_n(vectors) -> Subspace:
    """Quotient map: span of an independent n-tuple.

    Orthonormalizes via column-pivoted QR, so the result depends only on
    the span (any rescaling of the input gives the same subspace).

    Raises
    ------
    RankDeficiencyError
        If the smallest singular value falls below RANK_TOL relative to
        the largest: the tuple is not in X_n.
    """
    m = _as_columns(vectors)
    if m.shape[1] > m.shape[0]:
        raise RankDeficiencyError("tuple not in X_n: more vectors than dimensions")
    s = scipy.linalg.svdvals(m)
    if s[0] == 0 or s[-1] < RANK_TOL * s[0]:
        raise RankDeficiencyError("tuple not in X_n: numerically dependent")
    q, _, _ = scipy.linalg.qr(m, mode="economic", pivoting=True)
    return Subspace(q)


def perturb_to_independent(vectors, eps: float, seed) -> list:
    """Nudge a dependent tuple into X_n.

    Already-independent tuples are returned unchanged. Otherwise each
    vector receives a fresh Gaussian perturbation of norm at most `eps`
    until pi_n accepts, keeping every vector within `eps` of its input
    in the Euclidean norm.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    vecs = [v if isinstance(v, Vector) else Vector.from_dense(np.asarray(v)) for v in vectors]
    try:
        pi_n(vecs)
        return vecs
    except RankDeficiencyError:
        pass
    rng = as_generator(seed)
    dim = vecs[0].dim
    for _ in range(100):
        trial = []
        for v in vecs:
            noise = rng.standard_normal(dim)
            norm = np.linalg.norm(noise)
            noise = noise * (0.999 * eps / norm)
            trial.append(v.add(Vector.from_dense(noise)))
        try:
            pi_n(trial)
            return trial
        except RankDeficiencyError:
            continue
    raise RankDeficiencyError("perturbation failed to reach X_n in 100 attempts")


def grassmann_distance(a: Subspace, b: Subspace) -> float:
    """Gap metric: the largest principal angle between equal-rank subspaces."""
    if a.dim != b.dim:
        raise DimensionMismatchError("subspaces live in different ambient spaces")
    if a.n != b.n:
        raise DimensionMismatchError("gap metric needs equal subspace dimensions")
    s = scipy.linalg.svdvals(a.frame.conj().T @ b.frame)
    smin = min(1.0, max(0.0, float(s[-1])))
    return math.acos(smin)


def push_forward(op, sub: Subspace) -> Subspace:
    """Image of a subspace under an operator, re-orthonormalized.

    `op` may be an Operator or a dense matrix. Raises when the image
    loses rank.
    """
    mat = op.matrix() if hasattr(op, "matrix") else np.asarray(op)
    img = mat @ sub.frame
    s = scipy.linalg.svdvals(img)
    if s[0] == 0 or s[-1] < RANK_TOL * s[0]:
        raise DimensionDropError("dimension drop under T")
    q, _, _ = scipy.linalg.qr(img, mode="economic", pivoting=True)
    return Subspace(q)


def sphere_deviation(e: Subspace, f: Subspace, samples: int = 200, seed: int = 0) -> float:
    """Monte-Carlo one-sided deviation between unit spheres.

    Estimates ``sup_{z in S_F} inf_{x in S_E} ||x - z||`` by sampling
    unit vectors of F; the inner infimum has the closed form
    ``||z - p/||p||||`` with p the orthogonal projection of z onto E
    (and sqrt(2) when p = 0). Deterministic for a fixed seed.
    """
    if e.dim != f.dim:
        raise DimensionMismatchError("subspaces live in different ambient spaces")
    if samples <= 0:
        raise ValueError("samples must be positive")
    rng = as_generator(seed)
    worst = 0.0
    for _ in range(samples):
        coeff = rng.standard_normal(f.n)
        if np.iscomplexobj(f.frame):
            coeff = coeff + 1j * rng.standard_normal(f.n)
        z = f.frame @ coeff
        nz = np.linalg.norm(z)
        if nz == 0:
            continue
        z = z / nz
        p = e.project(z)
        np_ = np.linalg.norm(p)
        if np_ < 1e-300:
            d = math.sqrt(2.0)
        else:
            d = float(np.linalg.norm(z - p / np_))
        worst = max(worst, d)
    return worst
