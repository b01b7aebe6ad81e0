import json

import numpy as np
import pytest

from l1tcl.cli import main
from l1tcl.data import Dataset, load_csv, write_csv


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "toy", "--seed", "1", "--out", str(out)]) == 0
    return out


def _run(argv, capsys):
    code = main(argv)
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_simulate_writes_pair_oracle_and_manifest(sim):
    assert {p.name for p in sim.iterdir()} == {"target.csv", "source.csv", "oracle.json",
                                              "manifest.json"}
    oracle = json.loads((sim / "oracle.json").read_text())
    assert oracle["true_tau"] == pytest.approx(-2 / 30)
    assert load_csv(sim / "target.csv").n == 100
    man = json.loads((sim / "manifest.json").read_text())
    assert man["seed"] == 1 and man["command"] == "simulate"


def test_estimate_report(sim, capsys, tmp_path):
    code, out, _ = _run(["estimate", "--target", str(sim / "target.csv"), "--source",
                         str(sim / "source.csv"), "--framework", "l1-tcl", "--estimator", "ipw",
                         "--treatment-col", "z", "--outcome-col", "y", "--seed", "7",
                         "--out", str(tmp_path / "e")], capsys)
    assert code == 0
    rep = json.loads(out)
    for key in ("estimate", "lambda_ps", "n_clipped", "theory_lambda"):
        assert key in rep
    man = json.loads((tmp_path / "e" / "manifest.json").read_text())
    assert set(man["input_sha256"]) == {str(sim / "target.csv"), str(sim / "source.csv")}
    assert man["version"] and man["started"] <= man["finished"]


def test_replay_is_byte_identical(sim, capsys, tmp_path):
    argv = ["bootstrap", "--target", str(sim / "target.csv"), "--source", str(sim / "source.csv"),
            "--framework", "to-cl", "--trials", "8", "--out", str(tmp_path / "a")]
    assert _run(argv, capsys)[0] == 0
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert "--seed" not in argv and isinstance(man["seed"], int)
    replay = [a if a != str(tmp_path / "a") else str(tmp_path / "b") for a in man["replay_argv"]]
    replay += ["--jobs", "2"]
    assert _run(replay, capsys)[0] == 0
    for name in ("bootstrap.json", "bootstrap_trials.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bootstrap_summary(sim, capsys):
    code, out, _ = _run(["bootstrap", "--target", str(sim / "target.csv"), "--source",
                         str(sim / "source.csv"), "--trials", "10", "--ci", "0.9", "--seed", "3"],
                        capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["ci_low"] <= rep["median"] <= rep["ci_high"] and rep["trials"] == 10


@pytest.mark.parametrize("cmd", [
    ["select-lambda", "--model", "or"],
    ["smd"],
    ["fit-nuisance", "--model", "both", "--standardize"],
    ["estimate", "--estimator", "dr", "--framework", "merge-cl", "--format", "table"],
])
def test_other_subcommands(sim, capsys, tmp_path, cmd):
    argv = cmd[:1] + ["--target", str(sim / "target.csv"), "--source", str(sim / "source.csv"),
                      "--seed", "1", "--out", str(tmp_path / "o")] + cmd[1:]
    code, out, err = _run(argv, capsys)
    assert code == 0, err
    assert out.strip()
    assert (tmp_path / "o" / "manifest.json").exists()


def test_grid_experiment_outputs(capsys, tmp_path):
    code, out, _ = _run(["grid-experiment", "--trials", "1", "--d-values", "4", "--s-values",
                         "1", "6", "--seed", "2", "--out", str(tmp_path)], capsys)
    assert code == 0
    heat = (tmp_path / "heatmap.csv").read_text().splitlines()
    assert heat[0].startswith("d,s,n,n_s,baseline,err_difference,err_difference_truncated")
    assert any("s=6 > d=4" in line for line in heat)
    assert (tmp_path / "grid_results.csv").exists()


def test_part_subcommand(capsys, tmp_path):
    rng = np.random.default_rng(0)
    n = 300
    lab = (rng.random(n) < 0.4).astype(float)
    X = np.column_stack([rng.normal(size=n), lab])
    z = (rng.random(n) < 0.5).astype(float)
    write_csv(Dataset(X, z, z + rng.normal(size=n)), tmp_path / "d.csv")
    code, out, err = _run(["part", "--data", str(tmp_path / "d.csv"), "--partition-column", "x2",
                           "--target-label", "1", "--seed", "0"], capsys)
    assert code == 0, err
    assert json.loads(out)["ps_source"] == "transfer"


def test_exit_codes(sim, capsys, tmp_path):
    assert _run(["estimate", "--bogus"], capsys)[0] == 1
    assert _run([], capsys)[0] == 1
    assert _run(["estimate", "--target", "x"], capsys)[0] == 1
    code, _, err = _run(["estimate", "--target", str(tmp_path / "none.csv"), "--source",
                         str(sim / "source.csv")], capsys)
    assert code == 2 and "file not found" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,z,y\n1,2,0\n")
    code, _, err = _run(["estimate", "--target", str(bad), "--source", str(sim / "source.csv")],
                        capsys)
    assert code == 2 and "treatment not binary at row 1" in err
    code, _, _ = _run(["bootstrap", "--target", str(sim / "target.csv"), "--source",
                       str(sim / "source.csv"), "--ci", "1.5"], capsys)
    assert code == 1
    assert _run(["simulate", "toy", "--seed", "1"], capsys)[0] == 1  # needs --out


def test_strict_mode_exit_3(sim, capsys):
    # a one-iteration budget cannot meet the stopping rule
    argv = ["estimate", "--target", str(sim / "target.csv"), "--source", str(sim / "source.csv"),
            "--framework", "l1-tcl", "--lambda-ps", "0.001", "--seed", "0"]
    import l1tcl.glm as glm
    original = glm.SolverConfig.__init__.__defaults__
    try:
        glm.SolverConfig.__init__.__defaults__ = (1,) + original[1:]
        assert _run(argv + ["--strict"], capsys)[0] == 3
        code, out, _ = _run(argv, capsys)
        assert code == 0 and json.loads(out)["converged"] is False
    finally:
        glm.SolverConfig.__init__.__defaults__ = original
