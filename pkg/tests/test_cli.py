"""Command-line interface: exit codes, output schemas, reproducibility."""

import json
import os

import pytest

from spdelab.cli import run

FAST = ["--nx", "8", "--nt", "32", "--horizon", "0.1",
        "--epsilon-ladder", "1e-2,3e-3", "--paths-per-epsilon", "2"]


def read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


def test_simulate_writes_csv_and_manifest(tmp_path):
    out = tmp_path / "run"
    code = run(["simulate", "--preset", "heat", "--epsilon", "0",
                "--out", str(out)] + FAST)
    assert code == 0
    csv = read_bytes(out / "path.csv").decode()
    lines = csv.splitlines()
    assert lines[0] == "step,time,l2_norm,max_abs"
    assert len(lines) == 34  # header + nt+1 rows
    assert "\r" not in csv
    manifest = json.loads(read_bytes(out / "manifest.json"))
    assert manifest["config"]["preset"] == "heat"
    assert "config_sha256" in manifest


def test_simulate_twice_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["simulate", "--preset", "burgers", "--epsilon", "0",
                    "--out", str(out)] + FAST) == 0
    assert read_bytes(a / "path.csv") == read_bytes(b / "path.csv")


def test_unknown_preset_exit_2_names_field(tmp_path, capsys):
    code = run(["simulate", "--preset", "navier", "--out", str(tmp_path)] + FAST)
    assert code == 2
    err = capsys.readouterr().err
    assert "preset" in err


def test_bad_config_file_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("this is = not [ valid\n")
    code = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "config" in capsys.readouterr().err


def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("frobnicate = 3\n")
    code = run(["simulate", "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "frobnicate" in capsys.readouterr().err


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("\n".join([
        'preset = "burgers"',
        "nx = 8", "nt = 32", "horizon = 0.1",
        "epsilon_ladder = [1e-2, 3e-3]",
        "paths_per_epsilon = 2",
        "seed = 11",
    ]) + "\n")
    out = tmp_path / "run"
    code = run(["contraction-study", "--config", str(cfg), "--seed", "99",
                "--out", str(out)])
    assert code == 0
    manifest = json.loads(read_bytes(out / "manifest.json"))
    assert manifest["config"]["seed"] == 99  # flag wins over file
    rows = read_bytes(out / "rows.csv").decode().splitlines()
    assert rows[0] == ("epsilon,estimate,stderr,ci_low,ci_high,"
                       "n_paths,exceedance_fraction")
    assert len(rows) == 3


def test_study_rerun_and_thread_count_byte_identical(tmp_path):
    outs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "2")):
        out = tmp_path / name
        code = run(["contraction-study", "--threads", threads,
                    "--out", str(out)] + FAST)
        assert code == 0
        outs.append(read_bytes(out / "rows.csv"))
    assert outs[0] == outs[1] == outs[2]


def test_degenerate_study_exit_4(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("\n".join([
        'preset = "custom"',
        "[coefficients]",
        'sigma = "0"',
    ]) + "\n")
    # sigma = 0 means no paths ever move: with a tiny amplitude cap every
    # path exceeds at t=0 and the study is empty
    code = run(["contraction-study", "--config", str(cfg),
                "--amplitude-cap", "1e-9", "--out", str(tmp_path / "run")]
               + FAST)
    assert code == 4
    assert "degenerate" in capsys.readouterr().err


def test_blow_up_exit_3(tmp_path, capsys):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text("\n".join([
        'preset = "custom"',
        'initial_condition = "10*sin(pi*x)"',
        "[coefficients]",
        'f = "r**3 * 1e6"',
        'sigma = "0"',
    ]) + "\n")
    code = run(["simulate", "--config", str(cfg), "--epsilon", "0",
                "--nx", "8", "--nt", "8", "--horizon", "1.0",
                "--out", str(tmp_path / "run")])
    assert code == 3
    assert "blow-up" in capsys.readouterr().err


def test_mdp_study_naive(tmp_path):
    out = tmp_path / "run"
    code = run(["mdp-study", "--mode", "naive", "--event-threshold", "0.5",
                "--out", str(out)] + FAST)
    assert code == 0
    rows = read_bytes(out / "rows.csv").decode().splitlines()
    assert rows[0].startswith("epsilon,estimate,stderr,ci_low,ci_high,n_paths,")
    assert len(rows) == 3


def test_rate_subcommand_writes_json(tmp_path):
    out = tmp_path / "run"
    code = run(["rate", "--control", "sin(pi*x)",
                "--reg-ladder", "1e-2,1e-4", "--out", str(out)] + FAST)
    assert code == 0
    payload = json.loads(read_bytes(out / "rate.json"))
    assert len(payload["ladder"]) == 2
    values = [step["value"] for step in payload["ladder"]]
    assert all(v >= 0.0 for v in values)
    # feasible-control upper bound
    assert values[-1] <= payload["control_half_norm_sq"] + 1e-9


def test_refine_study(tmp_path):
    out = tmp_path / "run"
    code = run(["refine-study", "--factors", "2", "--out", str(out)] + FAST)
    assert code == 0
    rows = read_bytes(out / "rows.csv").decode().splitlines()
    assert rows[0] == "kind,factor,path,value"


def test_kernel_audit_cli(tmp_path):
    out = tmp_path / "run"
    code = run(["kernel-audit", "--out", str(out)])
    assert code == 0
    rows = read_bytes(out / "audit.csv").decode().splitlines()
    assert rows[0] == "estimate_id,sample_count,fitted_constant,worst_point,passed"
    assert len(rows) == 8  # header + seven estimates
    assert all(line.endswith("true") for line in rows[1:])
