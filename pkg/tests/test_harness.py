"""Command-line interface: parsing, validation, output files."""

import json
import math

import numpy as np
import pytest

from linteg.harness import ExperimentSpec, main, parse_step_size
from linteg.integrators import ConfigError
from linteg.tableau import build_hbvm_tableau


def test_parse_step_size():
    assert parse_step_size("0.125") == 0.125
    assert parse_step_size("pi") == pytest.approx(math.pi, abs=0)
    assert parse_step_size("pi/30") == pytest.approx(math.pi / 30, abs=0)
    assert parse_step_size("20pi") == pytest.approx(20 * math.pi, abs=0)
    assert parse_step_size("2*pi") == pytest.approx(2 * math.pi, abs=0)
    assert parse_step_size("1.5pi/3") == pytest.approx(0.5 * math.pi, abs=0)
    assert parse_step_size("1e-3") == 1e-3
    with pytest.raises(ConfigError):
        parse_step_size("two pi")


def test_spec_validation_rejects_bad_combinations():
    good = ExperimentSpec(
        experiment="drift", method="elim", s=3, k=6, invariants="L1",
        step_sizes=(0.1,), horizon=10.0,
    )
    good.validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="drift", method="elim", s=3, k=6,
                       step_sizes=(0.1,), horizon=10.0).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="drift", method="hbvm", s=3, invariants="L1",
                       step_sizes=(0.1,), horizon=10.0).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="drift", method="gauss", s=3, k=12,
                       step_sizes=(0.1,), horizon=10.0).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="drift", method="hbvm", s=3,
                       step_sizes=(0.1, 0.05), horizon=10.0).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="alpha-norm", method="hbvm", s=3,
                       step_sizes=(0.1,), horizon=10.0).validate()
    with pytest.raises(ConfigError):
        ExperimentSpec(experiment="drift", problem="pendulum", method="hbvm",
                       s=2, step_sizes=(0.1,), horizon=10.0).validate()


def test_tableau_subcommand_writes_schema(tmp_path):
    out = tmp_path / "tab.json"
    assert main(["tableau", "-s", "2", "-k", "6", "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    assert set(payload) == {"s", "k", "c", "b", "A"}
    tab = build_hbvm_tableau(6, 2)
    np.testing.assert_array_equal(np.array(payload["A"]), tab.A)
    np.testing.assert_array_equal(np.array(payload["c"]), tab.c)


def test_tableau_subcommand_stdout(capsys):
    assert main(["tableau", "-s", "1"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["s"] == 1 and payload["k"] == 1
    assert payload["A"] == [[0.5]]


def test_convergence_subcommand(tmp_path):
    out = tmp_path / "conv.csv"
    code = main([
        "convergence", "--method", "hbvm", "-s", "2", "-k", "4",
        "--steps", "pi/8,pi/16", "--horizon", "2pi", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "h,n_steps,error,order,iteration_total"
    assert len(lines) == 3
    first = lines[1].split(",")
    assert first[1] == "16" and first[3] == ""
    second = lines[2].split(",")
    # fourth order at these steps
    assert 3.0 < float(second[3]) < 4.6


def test_drift_subcommand_and_monitoring(tmp_path):
    out = tmp_path / "drift.csv"
    code = main([
        "drift", "--method", "hbvm", "-s", "2", "-k", "6",
        "--steps", "0.1", "--horizon", "5", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    # plain run on kepler still reports both invariant errors
    assert lines[0] == "n,t,h_error,err_L1,err_L2,iterations,fallback"
    assert len(lines) == 52
    row0 = lines[1].split(",")
    assert row0[0] == "0" and row0[2] == "0"


def test_alpha_norm_subcommand(tmp_path):
    out = tmp_path / "alpha.csv"
    code = main([
        "alpha-norm", "--method", "elim", "-s", "3", "-k", "6",
        "--invariants", "L1L2", "--steps", "pi/16", "--horizon", "pi",
        "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "h,n,t,alpha_1,alpha_2,alpha_inf"
    assert len(lines) == 17
    row = lines[1].split(",")
    assert float(row[5]) == max(abs(float(row[3])), abs(float(row[4])))


def test_iterations_subcommand(tmp_path):
    out = tmp_path / "iters.csv"
    code = main([
        "iterations", "--method", "gauss", "-s", "2",
        "--steps", "pi/8,pi/16", "--horizon", "2pi", "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "h,n_steps,iteration_total,fallback_steps"
    totals = [int(line.split(",")[2]) for line in lines[1:]]
    assert totals[0] > 0 and totals[1] > totals[0]


def test_determinism_byte_identical(tmp_path):
    args = [
        "drift", "--method", "elim", "-s", "3", "-k", "6", "--invariants", "L1",
        "--steps", "0.1", "--horizon", "5",
    ]
    out_a = tmp_path / "a.csv"
    out_b = tmp_path / "b.csv"
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_validation_fails_before_writing(tmp_path):
    out = tmp_path / "never.csv"
    code = main([
        "convergence", "--method", "elim", "-s", "3", "-k", "6",
        "--steps", "0.1", "--horizon", "10", "--out", str(out),
    ])
    assert code == 2
    assert not out.exists()


def test_nonconvergence_exit_code(tmp_path):
    out = tmp_path / "fail.csv"
    code = main([
        "drift", "--method", "hbvm", "-s", "2", "-k", "4", "--tol", "1e-15",
        "--steps", "0.5", "--horizon", "50", "--out", str(out),
    ])
    assert code == 1


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "method": "hbvm", "s": 2, "k": 4,
        "steps": "pi/8", "horizon": "2pi",
    }))
    out = tmp_path / "from_config.csv"
    assert main(["iterations", "--config", str(cfg), "--out", str(out)]) == 0
    base_total = int(out.read_text().splitlines()[1].split(",")[2])

    out2 = tmp_path / "override.csv"
    code = main([
        "iterations", "--config", str(cfg), "--tol", "1e-6", "--out", str(out2),
    ])
    assert code == 0
    loose_total = int(out2.read_text().splitlines()[1].split(",")[2])
    assert loose_total < base_total


def test_config_file_rejects_unknown_keys(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"stepsize": 0.1}))
    assert main(["iterations", "--config", str(cfg), "--out", "x.csv"]) == 2


def test_env_tolerance_default(tmp_path, monkeypatch):
    args = [
        "iterations", "--method", "hbvm", "-s", "2", "-k", "4",
        "--steps", "pi/8", "--horizon", "2pi",
    ]
    tight = tmp_path / "tight.csv"
    assert main(args + ["--out", str(tight)]) == 0
    monkeypatch.setenv("ELIM_FP_TOL", "1e-6")
    loose = tmp_path / "loose.csv"
    assert main(args + ["--out", str(loose)]) == 0
    flag = tmp_path / "flag.csv"
    assert main(args + ["--tol", "1e-14", "--out", str(flag)]) == 0

    count = lambda p: int(p.read_text().splitlines()[1].split(",")[2])
    assert count(loose) < count(tight)
    assert count(flag) == count(tight)


def test_csv_floats_carry_16_significant_digits(tmp_path):
    out = tmp_path / "conv.csv"
    main([
        "convergence", "--method", "gauss", "-s", "2",
        "--steps", "pi/8", "--horizon", "2pi", "--out", str(out),
    ])
    h_text = out.read_text().splitlines()[1].split(",")[0]
    # 16 significant digits: within one last-place unit of the exact value
    assert float(h_text) == pytest.approx(math.pi / 8, rel=1e-15, abs=0)
    assert len(h_text.replace(".", "").lstrip("0")) == 16
