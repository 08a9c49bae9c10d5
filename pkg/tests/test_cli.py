import json
import subprocess
import sys

import numpy as np
import pytest

from cstrain import matio
from cstrain.cli import main
from cstrain.dictlearn import sparse_factorization
from cstrain.linalg import rip_constant
from cstrain.pipeline import train, train_and_recover
from cstrain.rand_models import (ModelSpec, RngStream, gen_component_matrix, gen_gaussian_sensing,
                                 gen_sparse_combinator, gen_training_matrix)


@pytest.fixture
def instance(tmp_path):
    A = gen_gaussian_sensing(70, 80, RngStream(60))
    X = gen_component_matrix(80, 4, ModelSpec(0.3), RngStream(61))
    Z = gen_training_matrix(4, 8, 1, RngStream(62))
    z = gen_sparse_combinator(4, 2, RngStream(63))
    paths = {}
    for name, M in {"A": A, "B": A @ X @ Z, "b": A @ X @ z, "Y": X @ Z}.items():
        paths[name] = tmp_path / f"{name}.txt"
        matio.write_matrix(paths[name], M)
    return tmp_path, paths, (A, X, Z, z)


def test_rip_prints_epsilon(tmp_path, capsys):
    M = RngStream(64).generator().standard_normal((5, 8))
    matio.write_matrix(tmp_path / "M.txt", M)
    assert main(["rip", "--matrix", str(tmp_path / "M.txt"), "--t", "2"]) == 0
    assert float(capsys.readouterr().out) == rip_constant(M, 2).epsilon
    for argv in (["-v", "rip"], ["rip", "-v"]):
        assert main(argv + ["--matrix", str(tmp_path / "M.txt"), "--t", "2"]) == 0


def test_rip_sampled(tmp_path, capsys):
    matio.write_matrix(tmp_path / "M.txt", np.eye(6))
    assert main(["rip", "--matrix", str(tmp_path / "M.txt"), "--t", "3", "--samples", "5"]) == 0
    assert float(capsys.readouterr().out) == 0.0


def test_recover_identity(tmp_path, capsys):
    matio.write_matrix(tmp_path / "I.txt", np.eye(3))
    matio.write_matrix(tmp_path / "b.txt", [1.0, -2.0, 0.25])
    code = main(["recover", "--matrix", str(tmp_path / "I.txt"), "--rhs", str(tmp_path / "b.txt"),
                 "--report", str(tmp_path / "r.json")])
    assert code == 0
    np.testing.assert_allclose(matio.parse_matrix(capsys.readouterr().out).ravel(), [1, -2, 0.25])
    assert json.loads((tmp_path / "r.json").read_text())["status"] == "Optimal"


def test_gen_matches_library(tmp_path):
    out = tmp_path / "X.txt"
    assert main(["gen", "X", "--n", "30", "--p", "3", "--theta", "0.2", "--seed", "5",
                 "--stream", "2", "--out", str(out)]) == 0
    expected = gen_component_matrix(30, 3, ModelSpec(0.2), RngStream(5, 2))
    np.testing.assert_array_equal(matio.read_matrix(out), expected)
    meta = json.loads((tmp_path / "X.txt.json").read_text())
    assert meta["seed"] == 5 and meta["shape"] == [30, 3] and meta["spec"]["theta"] == 0.2
    assert main(["gen", "z", "--p", "4", "--k", "2", "--out", str(tmp_path / "z.txt")]) == 0
    assert matio.read_matrix(tmp_path / "z.txt").shape == (4, 1)


def test_factorize_matches_library(instance):
    tmp, paths, (A, X, Z, z) = instance
    out = tmp / "fact"
    assert main(["factorize", "--input", str(paths["Y"]), "--seed", "3", "--p", "4",
                 "--out-dir", str(out)]) == 0
    ref = sparse_factorization(X @ Z, RngStream(3), expected_rank=4)
    np.testing.assert_array_equal(matio.read_matrix(out / "X_bar.txt"), ref.X_bar)
    report = json.loads((out / "report.json").read_text())
    assert report["selected"] == ref.selected


def test_train_matches_library(instance):
    tmp, paths, (A, X, Z, z) = instance
    out = tmp / "train"
    assert main(["train", "--A", str(paths["A"]), "--B", str(paths["B"]), "--u", "48",
                 "--p", "4", "--seed", "9", "--out-dir", str(out)]) == 0
    ref = train(A, A @ X @ Z, 48, RngStream(9), p=4)
    np.testing.assert_array_equal(matio.read_matrix(out / "X_bar.txt"), ref.factorization.X_bar)
    assert json.loads((out / "report.json").read_text())["kept"] == ref.kept_columns


def test_pipeline_matches_library(instance):
    tmp, paths, (A, X, Z, z) = instance
    x_out, rep = tmp / "x.txt", tmp / "rep.json"
    assert main(["pipeline", "--A", str(paths["A"]), "--b", str(paths["b"]), "--B", str(paths["B"]),
                 "--u", "24,48", "--p", "4", "--seed", "9", "--out", str(x_out),
                 "--report", str(rep)]) == 0
    ref = train_and_recover(A, A @ X @ z, A @ X @ Z, [24, 48], RngStream(9), p=4)
    np.testing.assert_array_equal(matio.read_vector(x_out), ref.x)
    assert json.loads(rep.read_text())["u_used"] == ref.u_used


def test_experiment_writes_outputs(tmp_path, capsys):
    cfg = {"dims": {"m": 70, "n": 80, "p": 4, "q": 8, "s": 24, "t": 4, "t_bar": 2, "u": 48},
           "trials": 5, "master_seed": 1, "output_dir": str(tmp_path / "ignored")}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    out = tmp_path / "res"
    assert main(["experiment", "--config", str(tmp_path / "cfg.json"), "--trials", "2",
                 "--output-dir", str(out), "--no-timings"]) == 0
    assert "pipeline=" in capsys.readouterr().out
    summary = json.loads((out / "summary.json").read_text())
    assert summary["trials"] == 2 and summary["config"]["record_timings"] is False
    assert (out / "trials.csv").read_text().count("\n") == 3
    assert not (tmp_path / "ignored").exists()


def test_usage_and_domain_errors(tmp_path, capsys):
    assert main(["rip", "--matrix", "x", "--t", "2", "--bogus"]) == 2
    assert main([]) == 2
    assert main(["nosuch"]) == 2
    matio.write_matrix(tmp_path / "M.txt", [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    matio.write_matrix(tmp_path / "b.txt", [1.0, 1.0, 3.0])
    capsys.readouterr()
    assert main(["recover", "--matrix", str(tmp_path / "M.txt"), "--rhs", str(tmp_path / "b.txt")]) == 1
    assert capsys.readouterr().err.startswith("Infeasible")
    assert main(["rip", "--matrix", str(tmp_path / "missing.txt"), "--t", "1"]) == 1
    assert "IoError" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    matio.write_matrix(tmp_path / "M.txt", np.eye(3))
    proc = subprocess.run([sys.executable, "-m", "cstrain", "rip", "--matrix", str(tmp_path / "M.txt"),
                           "--t", "2"], capture_output=True, text=True, check=True)
    assert float(proc.stdout) == 0.0
