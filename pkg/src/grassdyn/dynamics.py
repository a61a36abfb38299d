"""Orbit experiments: density probes, witnesses, obstruction certificates.

A probe iterates an operator on a vector, a line, or a subspace and
records distances to a target; experiments aggregate probes over seeded
target families into hit-fraction reports. Positive experiments pair a
probe with a constructive seed (graph-type subspaces over visiting
vectors for scaled backward shifts); negative experiments certify
obstructions (constant right-angle distance for identity blocks).

Sampling is deterministic per seed; per-target probes are independent
of one another, so aggregation does not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatchError,
    KernelHitError,
    MassLossError,
    RankDeficiencyError,
)
from .grassmann import Subspace, pi_n
from .operators import BackwardShift, Diagonal, DirectSum, Operator
from .space import Vector, sample_vector
from ._util import as_generator

__all__ = [
    "OrbitTrace",
    "DensityReport",
    "vector_orbit_min_distance",
    "projective_orbit_min_distance",
    "subspace_orbit_min_distance",
    "sample_target_subspaces",
    "strong_n_supercyclicity_score",
    "transitivity_probe",
    "sc_criterion_witness",
    "SCWitness",
    "identity_block_obstruction_witness",
    "ObstructionCertificate",
    "backward_forward_seed",
    "graph_span_for_targets",
    "scaled_shift_orbit",
]

DEFAULT_LEAK_TOL = 1e-9


@dataclass
class OrbitTrace:
    """Distance record of one probe: pairs (iterate index, distance)."""

    records: list
    terminated_early: str | None = None

    @property
    def min_distance(self) -> float:
        return min(d for _, d in self.records)

    @property
    def argmin_k(self) -> int:
        return min(self.records, key=lambda kd: (kd[1], kd[0]))[0]

    @property
    def steps(self) -> int:
        return self.records[-1][0]

    def to_json(self) -> dict:
        return {
            "min_distance": self.min_distance,
            "argmin_k": self.argmin_k,
            "steps": self.steps,
            "terminated_early": self.terminated_early,
        }


def _operator_matrix(op):
    return op.matrix() if hasattr(op, "matrix") else np.asarray(op)


def _operator_leak_row(op, dim):
    if hasattr(op, "leak_row"):
        return op.leak_row()
    return np.zeros(dim)


def _records(dists):
    return [(k, float(d)) for k, d in enumerate(dists)]


def vector_orbit_min_distance(op, x: Vector, target: Vector, horizon: int, leak_tol: float = DEFAULT_LEAK_TOL) -> OrbitTrace:
    """Raw orbit distances ``||T^k x - target||`` for k = 0..horizon.

    Raises MassLossError as soon as the truncation-leak estimate for a
    step exceeds ``leak_tol`` times the iterate norm, so reported
    minima never rest on coordinates the truncation silently dropped.
    """
    mat = _operator_matrix(op)
    xd = x.to_dense() if isinstance(x, Vector) else np.asarray(x, dtype=float)
    td = target.to_dense() if isinstance(target, Vector) else np.asarray(target, dtype=float)
    if len(xd) != mat.shape[0] or len(td) != mat.shape[0]:
        raise DimensionMismatchError("vector dims do not match the operator")
    leak = _operator_leak_row(op, mat.shape[0])
    dists, completed, status = kernels.vector_orbit(mat, xd, td, horizon, leak, leak_tol)
    if status == kernels.STATUS_LEAK:
        raise MassLossError(
            f"truncation leakage exceeded {leak_tol:g} x orbit norm at step {completed + 1}"
        )
    return OrbitTrace(_records(dists))


def projective_orbit_min_distance(op, x: Vector, target: Vector, horizon: int) -> OrbitTrace:
    """Angles between the line through T^k x and the target line."""
    mat = _operator_matrix(op)
    xd = x.to_dense() if isinstance(x, Vector) else np.asarray(x, dtype=float)
    td = target.to_dense() if isinstance(target, Vector) else np.asarray(target, dtype=float)
    tn = np.linalg.norm(td)
    if tn == 0:
        raise ValueError("target line must be nonzero")
    td = td / tn
    if np.linalg.norm(xd) == 0:
        raise KernelHitError("orbit hits kernel at step 0")
    dists, completed, status = kernels.projective_orbit(mat, xd, td, horizon)
    if status == kernels.STATUS_COLLAPSE:
        raise KernelHitError(f"orbit hits kernel at step {completed + 1}")
    return OrbitTrace(_records(dists))


def subspace_orbit_min_distance(op, sub: Subspace, target: Subspace, horizon: int) -> OrbitTrace:
    """Gap distances between push-forward iterates of `sub` and `target`.

    A rank collapse ends the trace cleanly: the records collected up to
    the last full-rank iterate are returned with `terminated_early` set.
    """
    mat = _operator_matrix(op)
    if sub.dim != mat.shape[0] or target.dim != mat.shape[0]:
        raise DimensionMismatchError("subspace ambient dims do not match the operator")
    if sub.n != target.n:
        raise DimensionMismatchError("subspace and target ranks differ")
    dists, completed, status = kernels.subspace_orbit(mat, sub.frame, target.frame, horizon)
    early = "dimension-drop" if status == kernels.STATUS_COLLAPSE else None
    return OrbitTrace(_records(dists), terminated_early=early)


def sample_target_subspaces(dim: int, n: int, count: int, support, seed) -> list[Subspace]:
    """Seeded family of n-dimensional target subspaces on a support window.

    Each target is pi_n of an n-tuple of Gaussian vectors supported on
    `support`; dependent draws are rejected and redrawn.
    """
    rng = as_generator(seed)
    targets = []
    while len(targets) < count:
        tup = [sample_vector(dim, support, rng) for _ in range(n)]
        try:
            targets.append(pi_n(tup))
        except RankDeficiencyError:
            continue
    return targets


@dataclass
class DensityReport:
    """Hit-fraction aggregation of subspace orbit probes."""

    n: int
    threshold: float
    horizon: int
    support: tuple
    seed: int
    traces: list = field(default_factory=list)

    @property
    def hits(self) -> int:
        return sum(1 for t in self.traces if t.min_distance < self.threshold)

    @property
    def hit_fraction(self) -> float:
        return self.hits / len(self.traces) if self.traces else 0.0

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "threshold": self.threshold,
            "horizon": self.horizon,
            "support": list(self.support),
            "seed": self.seed,
            "targets": len(self.traces),
            "hits": self.hits,
            "hit_fraction": self.hit_fraction,
            "traces": [t.to_json() for t in self.traces],
        }

    def csv_rows(self):
        """Rows (target_id, k, distance) over every trace, in order."""
        for tid, trace in enumerate(self.traces):
            for k, d in trace.records:
                yield (tid, k, d)


def strong_n_supercyclicity_score(
    op,
    sub: Subspace,
    *,
    targets: int,
    support,
    horizon: int,
    threshold: float,
    seed: int,
    target_list: Sequence[Subspace] | None = None,
) -> DensityReport:
    """Empirical orbit-density score of one subspace against seeded targets.

    Samples `targets` subspaces of rank ``sub.n`` on `support` (or uses
    `target_list` when the caller pre-sampled them), probes each with
    subspace_orbit_min_distance, and reports the fraction whose minimum
    falls under `threshold`.
    """
    if target_list is None:
        target_list = sample_target_subspaces(sub.dim, sub.n, targets, support, seed)
    report = DensityReport(n=sub.n, threshold=threshold, horizon=horizon, support=tuple(support), seed=seed)
    for tgt in target_list:
        report.traces.append(subspace_orbit_min_distance(op, sub, tgt, horizon))
    return report


def transitivity_probe(
    op,
    u_center: Subspace,
    u_radius: float,
    v_center: Sequence[Vector],
    v_radius: float,
    *,
    horizon: int,
    samples: int,
    seed: int,
):
    """Finite return-time probe between a tuple-ball and a vector-tuple ball.

    Draws tuples near `u_center` (frame columns plus Gaussian noise of
    scale `u_radius`, mixed by a random invertible matrix), iterates
    the diagonal action of `op`, and reports the first iterate index
    whose tuple lies componentwise within `v_radius` of `v_center`.
    Returns (k, sample_index) for the earliest hit or None.
    """
    rng = as_generator(seed)
    mat = _operator_matrix(op)
    n = u_center.n
    v_dense = [v.to_dense() if isinstance(v, Vector) else np.asarray(v, dtype=float) for v in v_center]
    if len(v_dense) != n:
        raise DimensionMismatchError("v_center tuple length must equal subspace rank")
    best = None
    for s in range(samples):
        cols = u_center.frame + u_radius * rng.standard_normal(u_center.frame.shape)
        mix = rng.standard_normal((n, n))
        while abs(np.linalg.det(mix)) < 1e-6:
            mix = rng.standard_normal((n, n))
        tup = cols @ mix
        for k in range(horizon + 1):
            if k > 0:
                tup = mat @ tup
            ok = all(np.linalg.norm(tup[:, j] - v_dense[j]) < v_radius for j in range(n))
            if ok:
                if best is None or k < best[0]:
                    best = (k, s)
                break
    return best


# -- constructive seeds ----------------------------------------------------


def backward_forward_seed(lam: float, dim: int, visits: Sequence[np.ndarray], gap: int) -> np.ndarray:
    """Seed whose scaled-backward-shift orbit visits the given vectors.

    Stacks forward-shifted copies: ``y = sum_t lam^(t*gap) S^(t*gap) v_t``,
    so ``(B/lam)^(t*gap) y`` reproduces ``v_t`` exactly on its window,
    polluted only by later windows damped by ``lam^gap`` per block.
    Raises when the visits do not fit the truncation.
    """
    if not 0 < abs(lam) < 1:
        raise ValueError("|lam| must be in (0, 1)")
    y = np.zeros(dim)
    for t, v in enumerate(visits):
        v = np.asarray(v, dtype=float)
        offset = t * gap
        top = offset + len(v)
        if top > dim:
            raise DimensionMismatchError(
                f"visit {t} needs coordinates up to {top}, truncation holds {dim}"
            )
        y[offset:top] += (lam ** offset) * v
    return y


def scaled_shift_orbit(lam: float, y: np.ndarray, k: int) -> np.ndarray:
    """(B/lam)^k y for the unweighted backward shift, computed by slicing."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if k < len(y):
        out[: len(y) - k] = y[k:] / (lam ** k)
    return out


def graph_span_for_targets(lambdas: Sequence[float], shift_dim: int, targets: Sequence[Subspace], gap: int | None = None):
    """Graph subspace whose orbit revisits given targets on a schedule.

    For a diagonal-plus-backward-shift operator ``diag(lambdas) (+) B``,
    builds ``L = span{(e_j, y_j)}`` where each ``y_j`` is a
    backward-forward seed visiting the targets' normalized shift parts
    ``G_bot G_top^{-1}`` (near-singular tops are nudged invertible).
    Targets are visited in decreasing norm order so that the geometric
    damping of later windows stays below earlier tolerances; only as
    many targets as the truncation can hold are placed, and the
    metadata reports the schedule and capacity.

    Returns (Subspace, meta dict).
    """
    n = len(lambdas)
    lam_max = max(abs(l) for l in lambdas)
    if not 0 < lam_max < 1:
        raise ValueError("|lambda| must be in (0, 1) for every block rate")
    ambient = n + shift_dim
    mats = []
    for tgt in targets:
        if tgt.dim != ambient or tgt.n != n:
            raise DimensionMismatchError("target shape does not match the graph construction")
        top = np.array(tgt.frame[:n, :], dtype=float)
        bot = np.array(tgt.frame[n:, :], dtype=float)
        nudge = 0.0
        while np.linalg.svd(top + nudge * np.eye(n), compute_uv=False)[-1] < 1e-3:
            nudge = 1e-3 if nudge == 0.0 else 2 * nudge
        mats.append(bot @ np.linalg.inv(top + nudge * np.eye(n)))
    width = 0
    for m in mats:
        rows = np.nonzero(np.any(m != 0.0, axis=1))[0]
        if len(rows):
            width = max(width, int(rows[-1]) + 1)
    width = max(width, 1)
    if gap is None:
        damp_gap = math.ceil(math.log(0.05) / math.log(lam_max))
        gap = max(width, damp_gap)
    capacity = max(0, (shift_dim - width) // gap + 1)
    order = sorted(range(len(mats)), key=lambda t: -float(np.linalg.norm(mats[t])))
    placed = order[:capacity]
    ys = []
    for j, lam in enumerate(lambdas):
        # trim to the common window so stacked visits fit the capacity bound
        visits = [mats[t][:width, j] for t in placed]
        ys.append(backward_forward_seed(lam, shift_dim, visits, gap))
    cols = []
    for j in range(n):
        col = np.zeros(ambient)
        col[j] = 1.0
        col[n:] = ys[j]
        cols.append(col)
    sub = pi_n(np.stack(cols, axis=1))
    meta = {
        "gap": gap,
        "window_width": width,
        "capacity": capacity,
        "placed_targets": placed,
        "schedule": {int(t): i * gap for i, t in enumerate(placed)},
    }
    return sub, meta


# -- witnesses -------------------------------------------------------------


@dataclass
class SCWitness:
    """Supercyclicity-criterion evidence for a scaled backward shift."""

    lam: float
    horizon: int
    support_horizon: int
    products: list
    identity_errors: list

    @property
    def final_product(self) -> float:
        return self.products[-1]

    @property
    def max_identity_error(self) -> float:
        return max(self.identity_errors)

    @property
    def tail_monotone(self) -> bool:
        tail = self.products[self.support_horizon :]
        return all(b <= a + 1e-15 for a, b in zip(tail, tail[1:]))

    def to_json(self) -> dict:
        return {
            "lam": self.lam,
            "horizon": self.horizon,
            "support_horizon": self.support_horizon,
            "final_product": self.final_product,
            "max_identity_error": self.max_identity_error,
            "tail_monotone": self.tail_monotone,
        }


def sc_criterion_witness(lam: float, x: Vector, y: Vector, horizon: int) -> SCWitness:
    """Check the two criterion quantities for T = B/lam.

    The right inverse on finitely supported vectors is S_k = lam^k F^k
    with F the unweighted forward shift, so ``T^k S_k y = y`` should
    hold to machine exactness, and ``||T^k x|| ||S_k y||`` vanishes once
    k passes the support height of x.
    """
    if not 0 < abs(lam) < 1:
        raise ValueError("|lam| must be in (0, 1)")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    sup_x = max(x.coords, default=0)
    sup_y = max(y.coords, default=0)
    dim = max(x.dim, y.dim, sup_y + horizon + 2)
    xd = np.zeros(dim)
    for i, v in x.coords.items():
        xd[i] = v
    yd = np.zeros(dim)
    for i, v in y.coords.items():
        yd[i] = v
    products = []
    identity_errors = []
    tx = xd.copy()
    for k in range(horizon + 1):
        if k > 0:
            tx = np.concatenate([tx[1:], [0.0]]) / lam
        sy = np.zeros(dim)
        if k < dim:
            sy[k:] = (lam ** k) * yd[: dim - k]
        back = sy.copy()
        for _ in range(k):
            back = np.concatenate([back[1:], [0.0]]) / lam
        products.append(float(np.linalg.norm(tx) * np.linalg.norm(sy)))
        identity_errors.append(float(np.linalg.norm(back - yd)))
    return SCWitness(
        lam=lam,
        horizon=horizon,
        support_horizon=sup_x + 1,
        products=products,
        identity_errors=identity_errors,
    )


@dataclass
class ObstructionCertificate:
    """Constant right-angle certificate for an identity block."""

    n: int
    k_sub: int
    horizon: int
    distances: list
    max_deviation_from_right_angle: float

    @property
    def certified(self) -> bool:
        return self.max_deviation_from_right_angle <= 1e-12

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k_sub": self.k_sub,
            "horizon": self.horizon,
            "max_deviation_from_right_angle": self.max_deviation_from_right_angle,
            "certified": self.certified,
        }


def identity_block_obstruction_witness(n: int, k_sub: int, shift_op: Operator, horizon: int, seed: int) -> ObstructionCertificate:
    """Witness that a k_sub-orbit cannot leave its diagonal-block shadow.

    Builds ``Id_n (+) shift_op``, a graph-type subspace whose diagonal
    components span the first k_sub coordinates, and a target of the
    same rank containing a diagonal direction orthogonal to that span.
    The largest principal angle then stays at pi/2 for every iterate;
    the certificate records the worst deviation over the horizon.
    """
    if not 1 <= k_sub < n:
        raise ValueError("need 1 <= k_sub < n")
    op = DirectSum([Diagonal([1.0] * n), shift_op])
    ambient = n + shift_op.dim
    rng = as_generator(seed)
    cols = []
    for j in range(k_sub):
        col = np.zeros(ambient)
        col[j] = 1.0
        col[n:] = rng.standard_normal(shift_op.dim)
        cols.append(col)
    sub = pi_n(np.stack(cols, axis=1))
    target_indices = [n - 1] + list(range(k_sub - 1))
    target = Subspace.coordinate_span(ambient, target_indices)
    trace = subspace_orbit_min_distance(op, sub, target, horizon)
    dists = [d for _, d in trace.records]
    dev = max(abs(d - math.pi / 2) for d in dists)
    return ObstructionCertificate(
        n=n,
        k_sub=k_sub,
        horizon=horizon,
        distances=dists,
        max_deviation_from_right_angle=dev,
    )
