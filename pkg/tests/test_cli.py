"""End-to-end checks for the grassdyn command line runner."""

from __future__ import annotations

import json

import pytest

from grassdyn.cli import (
    SCHEMA,
    RunReport,
    canonical_json,
    main,
    report_fingerprint,
    rerun_report,
    run_experiment,
)
from grassdyn.errors import ConfigError

TOLERANCE = 1e-12


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def identity_density_config(expect):
    return {
        "operator": {
            "variant": "diagonal",
            "dim": 8,
            "params": {"entries": [[1.0, 0.0]] * 8},
        },
        "probe": "subspace",
        "subspace": {"mode": "coordinates", "indices": [0, 1]},
        "targets": 4,
        "horizon": 30,
        "threshold": 0.15,
        "support": [0, 8],
        "expect": expect,
        "seed": 11,
    }


def test_passing_run_exits_zero_and_emits_schema(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["--out", str(out), "claim-check", "--max-p", "4"])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["schema"] == SCHEMA
    assert report["pass"] is True
    assert report["experiment"] == "claim-check"
    assert [c["p"] for c in report["results"]["checks"]] == [2, 3, 4]
    assert capsys.readouterr().err == ""


def test_failing_run_exits_one_with_stderr_note(tmp_path, capsys):
    cfg = write_config(tmp_path, identity_density_config("dense"))
    out = tmp_path / "report.json"
    code = main(["--config", cfg, "--out", str(out), "orbit-density"])
    assert code == 1
    assert "orbit-density: checks failed" in capsys.readouterr().err
    report = json.loads(out.read_text())
    assert report["pass"] is False
    assert report["results"]["density"]["hit_fraction"] == 0.0


def test_obstructed_expectation_flips_verdict(tmp_path):
    cfg = write_config(tmp_path, identity_density_config("obstructed"))
    out = tmp_path / "report.json"
    assert main(["--config", cfg, "--out", str(out), "orbit-density"]) == 0
    assert json.loads(out.read_text())["pass"] is True


def test_config_error_exits_two(capsys):
    code = main(["phi-table", "--p", "2", "--delta", "4"])
    assert code == 2
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "below 2p = 4" in err


def test_missing_config_file_exits_two(capsys):
    assert main(["--config", "/no/such/file.json", "claim-check"]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_malformed_config_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["--config", str(bad), "claim-check"]) == 2
    assert "not valid JSON" in capsys.readouterr().err

    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    assert main(["--config", str(arr), "claim-check"]) == 2
    assert "top level must be an object" in capsys.readouterr().err


def test_flags_override_config_fields(tmp_path):
    cfg = write_config(tmp_path, {"max_p": 2})
    out = tmp_path / "report.json"
    assert main(["--config", cfg, "--out", str(out), "claim-check", "--max-p", "3"]) == 0
    report = json.loads(out.read_text())
    assert report["config"]["max_p"] == 3
    assert [c["p"] for c in report["results"]["checks"]] == [2, 3]


def test_seed_flag_wins_and_is_not_duplicated_in_config(tmp_path):
    cfg = write_config(tmp_path, identity_density_config("obstructed"))
    out = tmp_path / "report.json"
    assert main(["--config", cfg, "--seed", "99", "--out", str(out), "orbit-density"]) == 0
    report = json.loads(out.read_text())
    assert report["seed"] == 99
    assert "seed" not in report["config"]


def test_csv_export_phi_table(tmp_path):
    out = tmp_path / "table.csv"
    code = main(
        ["--format", "csv", "--out", str(out),
         "phi-table", "--p", "2", "--delta", "1", "--max-i", "10"]
    )
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "i,delta,value"
    assert len(lines) == 12
    assert lines[1] == "0,1,0/1"
    assert lines[2] == "1,1,1/1"


def test_csv_export_claim_check_stdout(capsys):
    assert main(["--format", "csv", "claim-check", "--max-p", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "p,pass"
    assert lines[1] == "2,True"
    assert lines[2] == "3,True"


def test_witness_identity_block_via_flags(tmp_path):
    out = tmp_path / "report.json"
    code = main(
        ["--out", str(out), "witness", "--case", "identity-block", "--n", "3", "--k-sub", "2"]
    )
    assert code == 0
    cert = json.loads(out.read_text())["results"]["certificate"]
    assert cert["certified"] is True
    assert cert["max_deviation_from_right_angle"] <= TOLERANCE


def test_witness_sc_shift_csv_header(capsys):
    assert main(["--format", "csv", "witness", "--case", "sc-shift", "--lam", "0.5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "k,product,identity_error"
    # horizon 60 rows plus k = 0
    assert len(lines) == 62


def test_spectrum_circles_two_points_expect_none(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "operator": {
                "variant": "diagonal",
                "dim": 2,
                "params": {"entries": [[1.0, 0.0], [2.0, 0.0]]},
            },
            "expect": "none",
        },
    )
    out = tmp_path / "report.json"
    assert main(["--config", cfg, "--out", str(out), "spectrum-circles"]) == 0
    report = json.loads(out.read_text())
    assert report["results"]["interval"] == "none"


def test_summability_rejects_descending_r_values(tmp_path, capsys):
    cfg = write_config(
        tmp_path, {"p": 2, "deltas": [0], "r_values": [40, 20]}
    )
    assert main(["--config", cfg, "summability"]) == 2
    assert "ascending" in capsys.readouterr().err


def test_summability_small_run_passes(tmp_path):
    cfg = write_config(
        tmp_path,
        {"p": 2, "deltas": [0], "r_values": [20, 40], "table_cap": 120},
    )
    out = tmp_path / "report.json"
    assert main(["--config", cfg, "--out", str(out), "summability"]) == 0
    report = json.loads(out.read_text())
    assert report["results"]["monotone"] is True
    assert report["results"]["increments"]["0"] < 1e-3


def test_canonical_json_is_sorted_and_rejects_nan():
    text = canonical_json({"b": 1, "a": 2})
    assert text.index('"a"') < text.index('"b"')
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_report_json_roundtrip_and_schema_guard():
    report, _ = run_experiment("claim-check", {"max_p": 3}, 0)
    clone = RunReport.from_json(report.to_json())
    assert report_fingerprint(clone) == report_fingerprint(report)
    bad = report.to_json()
    bad["schema"] = "grassdyn/0"
    with pytest.raises(ConfigError):
        RunReport.from_json(bad)


def test_fingerprint_ignores_wall_clock():
    report, _ = run_experiment("claim-check", {"max_p": 3}, 0)
    clone = RunReport.from_json(report.to_json())
    clone.wall_clock_sec = report.wall_clock_sec + 1.0
    assert report_fingerprint(clone) == report_fingerprint(report)


def test_rerun_reproduces_randomized_experiment():
    report, _ = run_experiment("orbit-density", identity_density_config("obstructed"), 11)
    again = rerun_report(report)
    assert report_fingerprint(again) == report_fingerprint(report)


def test_run_experiment_guards():
    with pytest.raises(ConfigError):
        run_experiment("no-such-experiment", {}, 0)
    with pytest.raises(ConfigError):
        run_experiment("claim-check", {"max_p": 3}, 2**64)


def test_workers_env_is_validated(monkeypatch, capsys):
    monkeypatch.setenv("GRASSDYN_WORKERS", "zero")
    assert main(["claim-check", "--max-p", "3"]) == 2
    assert "GRASSDYN_WORKERS" in capsys.readouterr().err
    monkeypatch.setenv("GRASSDYN_WORKERS", "0")
    assert main(["claim-check", "--max-p", "3"]) == 2
    capsys.readouterr()
    monkeypatch.setenv("GRASSDYN_WORKERS", "2")
    assert main(["claim-check", "--max-p", "3"]) == 0


def test_graph_span_config_requires_matching_dims(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {
            "operator": {
                "variant": "direct-sum",
                "dim": 10,
                "params": {
                    "blocks": [
                        {"variant": "diagonal", "dim": 2,
                         "params": {"entries": [[0.5, 0.0], [0.7, 0.0]]}},
                        {"variant": "backward-shift", "dim": 8, "params": {}},
                    ]
                },
            },
            "probe": "subspace",
            "subspace": {"mode": "graph-span", "lambdas": [0.5, 0.7], "shift_dim": 9},
        },
    )
    assert main(["--config", cfg, "orbit-density"]) == 2
    assert "must match the operator dim" in capsys.readouterr().err
