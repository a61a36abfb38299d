"""Experiment runner and report emitter; the package's entry point.

Single binary with subcommands. Every run embeds its fully resolved
config, seed, results payload, pass flag, and wall clock in a
versioned JSON report ("schema": "grassdyn/1"). Results are a pure
function of (experiment, config, seed); the wall clock is the only
field excluded from reproducibility comparisons. Diagnostics go to
stderr; the exit code is 0 exactly when the run passes, 1 on a failed
check, 2 on a config or runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass

import mpmath
import numpy as np

from .construction import (
    SCHEMES,
    ConstructionParams,
    admissible_polynomial,
    check_f_bound,
    defining_relation_check,
    derive_control_sequence,
    verify_claim,
)
from .dynamics import (
    DensityReport,
    graph_span_for_targets,
    identity_block_obstruction_witness,
    projective_orbit_min_distance,
    sample_target_subspaces,
    sc_criterion_witness,
    strong_n_supercyclicity_score,
    vector_orbit_min_distance,
)
from .errors import ConfigError, GrassdynError
from .functionals import (
    FunctionalTable,
    criterion_report,
    phi_kronecker_check,
    phi_value,
    summability_partial,
)
from .grassmann import Subspace, pi_n
from .operators import (
    BackwardShift,
    analytic_spectrum,
    circle_intersects_all_components,
    operator_from_json,
    radial_intersection,
)
from .space import Vector, sample_vector

__all__ = [
    "SCHEMA",
    "RunReport",
    "canonical_json",
    "run_experiment",
    "rerun_report",
    "report_fingerprint",
    "main",
]

SCHEMA = "grassdyn/1"
SUBCOMMANDS = (
    "orbit-density",
    "verify-construction",
    "claim-check",
    "phi-table",
    "summability",
    "witness",
    "spectrum-circles",
)


def canonical_json(payload) -> str:
    """Deterministic JSON text: sorted keys, fixed separators, no NaN."""
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False)


@dataclass
class RunReport:
    """One experiment run: resolved config, seed, results, verdict."""

    experiment: str
    config: dict
    seed: int
    results: dict
    passed: bool
    wall_clock_sec: float

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA,
            "experiment": self.experiment,
            "config": self.config,
            "seed": self.seed,
            "results": self.results,
            "pass": self.passed,
            "wall_clock_sec": self.wall_clock_sec,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RunReport":
        if obj.get("schema") != SCHEMA:
            raise ConfigError(f"unsupported report schema {obj.get('schema')!r}")
        return cls(
            experiment=obj["experiment"],
            config=obj["config"],
            seed=int(obj["seed"]),
            results=obj["results"],
            passed=bool(obj["pass"]),
            wall_clock_sec=float(obj["wall_clock_sec"]),
        )


def report_fingerprint(report: RunReport) -> str:
    """Canonical report text with the wall clock removed."""
    payload = report.to_json()
    payload.pop("wall_clock_sec", None)
    return canonical_json(payload)


# -- config plumbing ---------------------------------------------------------

_MISSING = object()


def _field(cfg: dict, key: str, default=_MISSING):
    if key in cfg:
        return cfg[key]
    if default is _MISSING:
        raise ConfigError(f"missing required config field '{key}'")
    cfg[key] = default
    return default


def _int_field(cfg, key, default=_MISSING, lo=None, hi=None):
    val = _field(cfg, key, default)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"config field '{key}': expected an integer, got {val!r}")
    if lo is not None and val < lo:
        raise ConfigError(f"config field '{key}': must be >= {lo}, got {val}")
    if hi is not None and val > hi:
        raise ConfigError(f"config field '{key}': must be <= {hi}, got {val}")
    return val


def _float_field(cfg, key, default=_MISSING, lo=None, hi=None):
    val = _field(cfg, key, default)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"config field '{key}': expected a number, got {val!r}")
    val = float(val)
    cfg[key] = val
    if lo is not None and val < lo:
        raise ConfigError(f"config field '{key}': must be >= {lo}, got {val}")
    if hi is not None and val > hi:
        raise ConfigError(f"config field '{key}': must be <= {hi}, got {val}")
    return val


def _choice_field(cfg, key, choices, default=_MISSING):
    val = _field(cfg, key, default)
    if val not in choices:
        raise ConfigError(
            f"config field '{key}': expected one of {sorted(choices)}, got {val!r}"
        )
    return val


def _support_field(cfg, key, dim, default=_MISSING):
    val = _field(cfg, key, default)
    if isinstance(val, int) and not isinstance(val, bool):
        val = [0, val]
    if not (isinstance(val, (list, tuple)) and len(val) == 2):
        raise ConfigError(f"config field '{key}': expected [lo, hi) or an int prefix")
    lo, hi = int(val[0]), int(val[1])
    if not 0 <= lo < hi <= dim:
        raise ConfigError(f"config field '{key}': window [{lo}, {hi}) outside [0, {dim})")
    cfg[key] = [lo, hi]
    return (lo, hi)


def _operator_field(cfg, key="operator"):
    spec = _field(cfg, key)
    if not isinstance(spec, dict):
        raise ConfigError(f"config field '{key}': expected an operator object")
    try:
        return operator_from_json(spec)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"config field '{key}': {exc}") from exc


def _vector_field(spec, dim, path):
    if isinstance(spec, list):
        if len(spec) > dim:
            raise ConfigError(f"config field '{path}': {len(spec)} entries exceed dim {dim}")
        return Vector(dim, {i: float(x) for i, x in enumerate(spec) if x != 0})
    if isinstance(spec, dict) and "coords" in spec:
        return Vector(dim, {int(k): float(v) for k, v in spec["coords"].items()})
    raise ConfigError(f"config field '{path}': expected a list or a coords object")


def _construction_params(cfg, *, memo_cap_default=4000):
    p = _int_field(cfg, "p", lo=2)
    scheme = _choice_field(cfg, "scheme", SCHEMES, "pow5")
    source = _choice_field(cfg, "admissible_source", ("classic", "section43"), "classic")
    memo_cap = _int_field(cfg, "memo_cap", memo_cap_default, lo=8)
    precision = _int_field(cfg, "precision_bits", 256, lo=64)
    return ConstructionParams(
        p=p,
        scheme=scheme,
        admissible_source=source,
        memo_cap=memo_cap,
        precision_bits=precision,
    )


def _mpf_str(x) -> str:
    return mpmath.nstr(mpmath.mpf(x), 30)


# -- runners -----------------------------------------------------------------


def _run_orbit_density(cfg: dict, seed: int):
    op = _operator_field(cfg)
    probe = _choice_field(cfg, "probe", ("subspace", "projective", "vector"), "subspace")
    count = _int_field(cfg, "targets", 20, lo=1)
    horizon = _int_field(cfg, "horizon", 500, lo=1)
    threshold = _float_field(cfg, "threshold", 0.15, lo=0.0)
    support = _support_field(cfg, "support", op.dim, [0, min(8, op.dim)])
    expect = _choice_field(cfg, "expect", ("dense", "obstructed"), "dense")
    min_hit = _float_field(cfg, "min_hit_fraction", 0.9, lo=0.0, hi=1.0)

    meta = None
    if probe == "subspace":
        sub_cfg = _field(cfg, "subspace")
        if not isinstance(sub_cfg, dict):
            raise ConfigError("config field 'subspace': expected an object")
        mode = _choice_field(sub_cfg, "mode", ("coordinates", "graph-span", "random"))
        if mode == "coordinates":
            indices = sub_cfg.get("indices")
            if not indices:
                raise ConfigError("config field 'subspace.indices': required for coordinates mode")
            n = len(indices)
            targets = sample_target_subspaces(op.dim, n, count, support, seed)
            sub = Subspace.coordinate_span(op.dim, [int(i) for i in indices])
        elif mode == "random":
            n = _int_field(sub_cfg, "n", lo=1)
            targets = sample_target_subspaces(op.dim, n, count, support, seed)
            rng = np.random.default_rng([seed, 0xA5])
            sub = pi_n([sample_vector(op.dim, (0, op.dim), rng) for _ in range(n)])
        else:
            lambdas = sub_cfg.get("lambdas")
            if not lambdas:
                raise ConfigError("config field 'subspace.lambdas': required for graph-span mode")
            lambdas = [float(x) for x in lambdas]
            shift_dim = _int_field(sub_cfg, "shift_dim", lo=1)
            if len(lambdas) + shift_dim != op.dim:
                raise ConfigError(
                    "config field 'subspace': lambdas + shift_dim must match the operator dim"
                )
            gap = sub_cfg.get("gap")
            n = len(lambdas)
            targets = sample_target_subspaces(op.dim, n, count, support, seed)
            sub, meta = graph_span_for_targets(
                lambdas, shift_dim, targets, None if gap is None else int(gap)
            )
        report = strong_n_supercyclicity_score(
            op,
            sub,
            targets=count,
            support=support,
            horizon=horizon,
            threshold=threshold,
            seed=seed,
            target_list=targets,
        )
    else:
        x0 = _vector_field(_field(cfg, "x0"), op.dim, "x0")
        rng = np.random.default_rng([seed, 7])
        report = DensityReport(
            n=1, threshold=threshold, horizon=horizon, support=support, seed=seed
        )
        for _ in range(count):
            tgt = sample_vector(op.dim, support, rng)
            if probe == "projective":
                report.traces.append(projective_orbit_min_distance(op, x0, tgt, horizon))
            else:
                report.traces.append(vector_orbit_min_distance(op, x0, tgt, horizon))

    results = {"probe": probe, "density": report.to_json()}
    if meta is not None:
        results["subspace_meta"] = {
            "gap": meta["gap"],
            "window_width": meta["window_width"],
            "capacity": meta["capacity"],
            "placed_targets": list(meta["placed_targets"]),
            "schedule": {str(k): v for k, v in meta["schedule"].items()},
        }
    fraction = report.hit_fraction
    passed = fraction >= min_hit if expect == "dense" else fraction == 0.0
    rows = [(tid, k, d) for tid, k, d in report.csv_rows()]
    return cfg, results, passed, (("target_id", "k", "distance"), rows)


def _run_verify_construction(cfg: dict, seed: int):
    params = _construction_params(cfg)
    max_n = _int_field(cfg, "max_n", 5, lo=1)
    closure_cap = _int_field(cfg, "closure_max_b", 700, lo=1)
    controls = derive_control_sequence(params, max_n)
    records = []
    all_ok = True
    for n in range(1, max_n + 1):
        rec = check_f_bound(params, n)
        ok = bool(rec["passed"] and rec["eps"] <= 1 and rec["lhs"] <= 1)
        all_ok = all_ok and ok
        records.append(
            {
                "n": n,
                "b_n": rec["b_n"],
                "eps_n": _mpf_str(rec["eps"]),
                "f_n_l1": _mpf_str(rec["lhs"]),
                "bound_rhs": _mpf_str(rec["rhs"]),
                "pass": ok,
            }
        )
    closure = []
    for n in range(max_n + 1):
        if params.b(n) > closure_cap:
            break
        chk = defining_relation_check(params, n)
        all_ok = all_ok and chk["passed"]
        closure.append(chk)
    results = {
        "controls": controls,
        "records": records,
        "closure": closure,
    }
    rows = [
        (n, params.p - 2 if params.admissible_source == "section43" else 0,
         "|".join(admissible_polynomial(params, n).to_strings()))
        for n in range(max_n + 1)
    ]
    return cfg, results, all_ok, (("index", "component", "coefficients"), rows)


def _run_claim_check(cfg: dict, seed: int):
    max_p = _int_field(cfg, "max_p", lo=2)
    checks = []
    for p in range(2, max_p + 1):
        checks.append({"p": p, "pass": bool(verify_claim(p))})
    passed = all(c["pass"] for c in checks)
    results = {"max_p": max_p, "checks": checks}
    rows = [(c["p"], c["pass"]) for c in checks]
    return cfg, results, passed, (("p", "pass"), rows)


def _run_phi_table(cfg: dict, seed: int):
    params = _construction_params(cfg)
    delta = _int_field(cfg, "delta", lo=0)
    if delta >= 2 * params.p:
        raise ConfigError(
            f"config field 'delta': must be below 2p = {2 * params.p}, got {delta}"
        )
    max_i = _int_field(cfg, "max_i", 100, lo=0)
    table = FunctionalTable(params, delta)
    values = []
    for i in range(max_i + 1):
        v = phi_value(table, i)
        values.append([i, f"{v.numerator}/{v.denominator}"])
    kron = phi_kronecker_check(params)
    results = {"delta": delta, "values": values, "kronecker_pass": bool(kron)}
    rows = [(i, delta, s) for i, s in values]
    return cfg, results, bool(kron), (("i", "delta", "value"), rows)


def _run_summability(cfg: dict, seed: int):
    params = _construction_params(cfg)
    deltas = _field(cfg, "deltas", [0, 1, 2, 3])
    if not (isinstance(deltas, list) and deltas and all(
        isinstance(d, int) and not isinstance(d, bool) and d >= 0 for d in deltas
    )):
        raise ConfigError("config field 'deltas': expected a list of indices >= 0")
    r_values = _field(cfg, "r_values", [600, 800])
    if not (isinstance(r_values, list) and len(r_values) >= 2 and all(
        isinstance(r, int) and not isinstance(r, bool) and r >= 0 for r in r_values
    ) and sorted(r_values) == r_values):
        raise ConfigError("config field 'r_values': expected an ascending list of two or more indices")
    threshold = _float_field(cfg, "increment_threshold", 1e-3, lo=0.0)
    cap = _int_field(cfg, "table_cap", max(4000, 2 * max(r_values)), lo=2 * max(r_values))
    want_report = bool(_field(cfg, "criterion_report", False))

    sums = {}
    increments = {}
    monotone = True
    for delta in deltas:
        table = FunctionalTable(params, delta, cap=cap)
        vals = [summability_partial(table, r) for r in r_values]
        monotone = monotone and all(b >= a for a, b in zip(vals, vals[1:]))
        sums[str(delta)] = [[r, _mpf_str(v)] for r, v in zip(r_values, vals)]
        increments[str(delta)] = float(vals[-1] - vals[-2])
    passed = monotone and all(inc < threshold for inc in increments.values())
    results = {
        "partial_sums": sums,
        "increments": increments,
        "monotone": monotone,
        "increment_threshold": threshold,
    }
    if want_report:
        rep = criterion_report(params)
        results["criterion"] = rep
        passed = passed and rep["valid"]
    rows = [
        (delta, r, s)
        for delta in deltas
        for r, s in sums[str(delta)]
    ]
    return cfg, results, passed, (("delta", "R", "partial_sum"), rows)


def _run_witness(cfg: dict, seed: int):
    case = _field(cfg, "case")
    if case == "identity-block":
        n = _int_field(cfg, "n", lo=2)
        k_sub = _int_field(cfg, "k_sub", lo=1)
        if not k_sub < n:
            raise ConfigError(f"config field 'k_sub': must be below n = {n}")
        shift_dim = _int_field(cfg, "shift_dim", 16, lo=1)
        horizon = _int_field(cfg, "horizon", 500, lo=1)
        cert = identity_block_obstruction_witness(
            n, k_sub, BackwardShift(shift_dim), horizon, seed
        )
        results = {"case": case, "certificate": cert.to_json()}
        rows = [(k, d) for k, d in enumerate(cert.distances)]
        return cfg, results, cert.certified, (("k", "distance"), rows)
    if case == "sc-shift":
        lam = _float_field(cfg, "lam", 0.5)
        horizon = _int_field(cfg, "horizon", 60, lo=1)
        dim = _int_field(cfg, "dim", 8, lo=2)
        x = _vector_field(_field(cfg, "x", [1.0, 1.0, 1.0, 1.0]), dim, "x")
        y = _vector_field(_field(cfg, "y", [1.0, 1.0, 1.0, 1.0]), dim, "y")
        wit = sc_criterion_witness(lam, x, y, horizon)
        results = {"case": case, "witness": wit.to_json()}
        passed = (
            wit.max_identity_error <= 1e-12
            and wit.final_product < 1e-6
            and wit.tail_monotone
        )
        rows = [
            (k, p, e)
            for k, (p, e) in enumerate(zip(wit.products, wit.identity_errors))
        ]
        return cfg, results, passed, (("k", "product", "identity_error"), rows)
    raise ConfigError(f"config field 'case': unknown witness case {case!r}")


def _run_spectrum_circles(cfg: dict, seed: int):
    op = _operator_field(cfg)
    desc = analytic_spectrum(op)
    grid_points = _int_field(cfg, "grid_points", 201, lo=2)
    r_max = _float_field(cfg, "r_max", 0.0, lo=0.0)
    expect = _choice_field(cfg, "expect", ("none", "nonempty", "any"), "any")

    radii = set()
    for comp in desc.components:
        lo, hi = comp.radial_interval()
        radii.add(round(lo, 12))
        radii.add(round(hi, 12))
    top = max((hi for c in desc.components for _, hi in [c.radial_interval()]), default=1.0)
    if r_max <= 0.0:
        r_max = top * 1.25 if top > 0 else 1.0
        cfg["r_max"] = r_max
    for t in range(grid_points):
        radii.add(round(r_max * t / (grid_points - 1), 12))
    candidates = sorted(radii)
    passing = [r for r in candidates if circle_intersects_all_components(desc, r)]
    interval = radial_intersection(desc)
    results = {
        "components": desc.describe(),
        "interval": "none" if interval is None else [interval[0], interval[1]],
        "passing_radii": passing,
    }
    if expect == "none":
        passed = interval is None
    elif expect == "nonempty":
        passed = interval is not None
    else:
        passed = True
    rows = [(r, r in set(passing)) for r in candidates]
    return cfg, results, passed, (("radius", "passes"), rows)


_RUNNERS = {
    "orbit-density": _run_orbit_density,
    "verify-construction": _run_verify_construction,
    "claim-check": _run_claim_check,
    "phi-table": _run_phi_table,
    "summability": _run_summability,
    "witness": _run_witness,
    "spectrum-circles": _run_spectrum_circles,
}


def run_experiment(experiment: str, config: dict, seed: int):
    """Execute one experiment; returns (RunReport, csv_export).

    `csv_export` is a (header, rows) pair for --format csv. The report
    embeds the resolved config, so a rerun needs nothing else.
    """
    runner = _RUNNERS.get(experiment)
    if runner is None:
        raise ConfigError(f"unknown experiment {experiment!r}")
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must fit in 64 bits")
    started = time.monotonic()
    resolved, results, passed, csv_export = runner(dict(config), seed)
    report = RunReport(
        experiment=experiment,
        config=resolved,
        seed=seed,
        results=results,
        passed=bool(passed),
        wall_clock_sec=time.monotonic() - started,
    )
    return report, csv_export


def rerun_report(report: RunReport) -> RunReport:
    """Re-execute a report from its embedded config and seed."""
    fresh, _ = run_experiment(report.experiment, report.config, report.seed)
    return fresh


# -- entry point -------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="grassdyn",
        description="Orbit experiments and exact verification for perturbed shifts",
    )
    parser.add_argument("--config", help="JSON config file", default=None)
    parser.add_argument("--seed", type=int, help="64-bit seed override", default=None)
    parser.add_argument("--out", help="output path", default=None)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("orbit-density", help="hit-fraction orbit density probe")
    sp = sub.add_parser("verify-construction", help="perturbed-shift certificate")
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--scheme", choices=SCHEMES, default=None)
    sp.add_argument("--max-n", type=int, default=None, dest="max_n")
    sp = sub.add_parser("claim-check", help="protected-prefix claim, p = 2..max_p")
    sp.add_argument("--max-p", type=int, default=None, dest="max_p")
    sp = sub.add_parser("phi-table", help="exact functional table")
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--scheme", choices=SCHEMES, default=None)
    sp.add_argument("--delta", type=int, default=None)
    sp.add_argument("--max-i", type=int, default=None, dest="max_i")
    sp = sub.add_parser("summability", help="partial-sum decay evidence")
    sp.add_argument("--p", type=int, default=None)
    sp.add_argument("--scheme", choices=SCHEMES, default=None)
    sp = sub.add_parser("witness", help="deterministic positive/negative witness")
    sp.add_argument("--case", choices=("identity-block", "sc-shift"), default=None)
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--k-sub", type=int, default=None, dest="k_sub")
    sp.add_argument("--lam", type=float, default=None)
    sp = sub.add_parser("spectrum-circles", help="circles meeting all spectral components")
    return parser


_FLAG_KEYS = ("p", "scheme", "max_n", "max_p", "delta", "max_i", "case", "n", "k_sub", "lam")


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError(f"config {args.config}: top level must be an object")
    for key in _FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _emit(report: RunReport, csv_export, args) -> None:
    if args.format == "csv":
        header, rows = csv_export
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows(rows)
        else:
            writer = csv.writer(sys.stdout)
            writer.writerow(header)
            writer.writerows(rows)
        return
    text = canonical_json(report.to_json())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    workers = os.environ.get("GRASSDYN_WORKERS")
    if workers is not None:
        try:
            if int(workers) < 1:
                raise ValueError
        except ValueError:
            print(f"error: GRASSDYN_WORKERS must be a positive integer, got {workers!r}", file=sys.stderr)
            return 2
    try:
        cfg = _load_config(args)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        cfg.pop("seed", None)
        report, csv_export = run_experiment(args.command, cfg, seed)
    except (GrassdynError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(report, csv_export, args)
    if not report.passed:
        print(f"{args.command}: checks failed", file=sys.stderr)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
