"""Backend dispatch for the orbit kernels.

The compiled extension handles real float64 workloads up to a measured
size crossover; larger problems, complex scalars, and builds without
the extension go through the numpy reference implementation, whose
BLAS-backed matvec wins once the matrices are big enough. Set
GRASSDYN_PURE_PYTHON=1 to force the fallback; `backend_name()` reports
whether the extension is available.
"""

from __future__ import annotations

import os

import numpy as np

from . import _orbit_py

STATUS_OK = _orbit_py.STATUS_OK
STATUS_COLLAPSE = _orbit_py.STATUS_COLLAPSE
STATUS_LEAK = _orbit_py.STATUS_LEAK

# measured crossover: beyond this many rows the BLAS-backed reference
# path outruns the hand loops (see benchmarks/bench_kernels.py)
DENSE_CROSSOVER_DIM = 128

_compiled = None
if os.environ.get("GRASSDYN_PURE_PYTHON") != "1":
    try:
        from . import _orbit_cy as _compiled  # type: ignore[no-redef]
    except ImportError:
        _compiled = None


def backend_name() -> str:
    return "compiled" if _compiled is not None else "python"


def _compilable(*arrays) -> bool:
    if _compiled is None:
        return False
    if any(np.iscomplexobj(a) for a in arrays):
        return False
    return np.asarray(arrays[0]).shape[0] <= DENSE_CROSSOVER_DIM


def _c(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    assert a.ndim == ndim
    return a


def subspace_orbit(mat, frame, target, kmax: int):
    if _compilable(mat, frame, target):
        return _compiled.subspace_orbit(_c(mat, 2), _c(frame, 2), _c(target, 2), int(kmax))
    return _orbit_py.subspace_orbit(mat, frame, target, int(kmax))


def vector_orbit(mat, x, target, kmax: int, leak_row, leak_tol: float):
    if _compilable(mat, x, target):
        return _compiled.vector_orbit(
            _c(mat, 2), _c(x, 1), _c(target, 1), int(kmax), _c(leak_row, 1), float(leak_tol)
        )
    return _orbit_py.vector_orbit(mat, x, target, int(kmax), leak_row, float(leak_tol))


def projective_orbit(mat, x, target_unit, kmax: int):
    if _compilable(mat, x, target_unit):
        return _compiled.projective_orbit(_c(mat, 2), _c(x, 1), _c(target_unit, 1), int(kmax))
    return _orbit_py.projective_orbit(mat, x, target_unit, int(kmax))
