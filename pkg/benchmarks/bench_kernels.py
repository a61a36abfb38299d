"""Timing comparison of the compiled orbit kernels and the numpy fallback.

Runs the three hot kernels on identical inputs through both
implementations across a range of truncation sizes and prints
best-of-N wall times. The dispatch column shows which path
grassdyn.kernels would pick at that size; the crossover constant in
that module comes from these measurements. Use GRASSDYN_PURE_PYTHON=1
to confirm the dispatch path itself falls back.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from grassdyn import _orbit_py, kernels

try:
    from grassdyn import _orbit_cy
except ImportError:
    _orbit_cy = None


def _inputs(dim: int, n: int, seed: int):
    rng = np.random.default_rng(seed)
    mat = rng.standard_normal((dim, dim)) * 0.2
    mat += np.diag(np.full(dim, 0.8))
    # keep the vector orbit bounded over long horizons
    mat *= 0.95 / np.linalg.norm(mat, 2)
    frame, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    target, _ = np.linalg.qr(rng.standard_normal((dim, n)))
    x = rng.standard_normal(dim)
    t_vec = rng.standard_normal(dim)
    t_unit = t_vec / np.linalg.norm(t_vec)
    leak = np.zeros(dim)
    return mat, frame, target, x, t_vec, t_unit, leak


def _best(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", type=int, nargs="+", default=[16, 64, 128, 256])
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--horizon", type=int, default=1000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"extension available: {kernels.backend_name() == 'compiled'}")
    if _orbit_cy is None:
        print("compiled module not importable; timing the reference path only")
    header = f"{'kernel':<18} {'dim':>5} {'compiled':>10} {'reference':>10} {'ratio':>7}  dispatch"
    print(header)
    k = args.horizon
    for dim in args.dims:
        mat, frame, target, x, t_vec, t_unit, leak = _inputs(dim, args.n, args.seed)
        c = np.ascontiguousarray
        cases = {
            "subspace_orbit": (
                None if _orbit_cy is None else
                (lambda: _orbit_cy.subspace_orbit(c(mat), c(frame), c(target), k)),
                lambda: _orbit_py.subspace_orbit(mat, frame, target, k),
            ),
            "vector_orbit": (
                None if _orbit_cy is None else
                (lambda: _orbit_cy.vector_orbit(c(mat), c(x), c(t_vec), k, c(leak), 1e-9)),
                lambda: _orbit_py.vector_orbit(mat, x, t_vec, k, leak, 1e-9),
            ),
            "projective_orbit": (
                None if _orbit_cy is None else
                (lambda: _orbit_cy.projective_orbit(c(mat), c(x), c(t_unit), k)),
                lambda: _orbit_py.projective_orbit(mat, x, t_unit, k),
            ),
        }
        picks = "compiled" if kernels._compilable(mat) else "reference"
        for name, (fast, ref) in cases.items():
            t_ref = _best(ref, args.repeats)
            if fast is None:
                print(f"{name:<18} {dim:>5} {'-':>10} {t_ref * 1e3:>8.2f}ms {'-':>7}  {picks}")
                continue
            d0, d1 = fast(), ref()
            if not np.allclose(d0[0], d1[0], atol=1e-9):
                raise SystemExit(f"{name} dim {dim}: backends disagree")
            t_fast = _best(fast, args.repeats)
            print(
                f"{name:<18} {dim:>5} {t_fast * 1e3:>8.2f}ms {t_ref * 1e3:>8.2f}ms "
                f"{t_ref / t_fast:>6.2f}x  {picks}"
            )


if __name__ == "__main__":
    main()
