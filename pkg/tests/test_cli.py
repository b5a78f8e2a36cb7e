import csv
import io
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from affine_snn.cli import main
from affine_snn.codec import save_model
from affine_snn.experiments import CSV_HEADER, spike_time_b1, spike_time_b2
from affine_snn.sampling import random_affine_snn
from affine_snn.training.data import write_idx

GOLDEN = Path(__file__).parent / "golden"


def _invoke(tmp_path, cmd, cfg, name="out.csv", env=None):
    cfg_path = tmp_path / f"{cmd}.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / name
    result = CliRunner().invoke(main, [cmd, "--config", str(cfg_path), "--out", str(out)], env=env)
    return result, out


def _rows(path):
    return list(csv.reader(io.StringIO(Path(path).read_text())))


def test_help_lists_subcommands():
    result = CliRunner().invoke(main, ["--help"])
    assert result.exit_code == 0
    for cmd in ("minmax", "teacher", "mnist", "discontinuity", "fem", "bounds"):
        assert cmd in result.output


def test_minmax_tiny(tmp_path):
    result, out = _invoke(tmp_path, "minmax", {"seed": 3, "eps_grid": [0.1, 0.01], "d0_min": 5, "n_samples": 50})
    assert result.exit_code == 0, result.output
    rows = _rows(out)
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 1 + 4
    for exp, seed, param, metric, value in rows[1:]:
        eps = float(param.split(";")[0].split("=")[1])
        assert exp in ("min", "max") and seed == "3" and metric == "max_error"
        assert float(value) <= eps * (1 + 1e-9)


def test_minmax_golden(tmp_path):
    _, out = _invoke(tmp_path, "minmax", {"seed": 3, "eps_grid": [0.1, 0.01], "d0_min": 5, "n_samples": 50})
    assert out.read_text() == (GOLDEN / "minmax_tiny.csv").read_text()


def test_minmax_requires_seed(tmp_path):
    result, _ = _invoke(tmp_path, "minmax", {"eps_grid": [0.1]})
    assert result.exit_code == 1
    assert "seed" in result.output


def test_unknown_key_rejected(tmp_path):
    result, _ = _invoke(tmp_path, "minmax", {"seed": 0, "epsilon": 0.1})
    assert result.exit_code == 1
    assert "unknown config keys" in result.output


def test_invalid_json(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    result = CliRunner().invoke(main, ["fem", "--config", str(cfg), "--out", str(tmp_path / "o.csv")])
    assert result.exit_code != 0


def test_discontinuity_values(tmp_path):
    result, out = _invoke(tmp_path, "discontinuity", {})
    assert result.exit_code == 0, result.output
    rows = {(r[0], r[2], r[3]): float(r[4]) for r in _rows(out)[1:]}
    assert rows[("input_jump", "eps=0.001", "t_above")] == pytest.approx(1.0, abs=1e-12)
    assert rows[("input_jump", "eps=0.001", "t_below")] == pytest.approx(2.001, abs=1e-12)
    assert rows[("delay_jump", "s=0.5;t=0.0", "t_plus")] == pytest.approx(1.0, abs=1e-12)
    assert rows[("delay_jump", "s=0.5;t=0.0", "t_minus")] == pytest.approx(2.5, abs=1e-12)
    assert rows[("delay_jump", "s=0.01;t=0.0", "jump")] >= 1.0


def test_discontinuity_helpers():
    assert spike_time_b1(0.1) == pytest.approx((1.0, 2.1), abs=1e-12)
    assert spike_time_b2(0.0, 0.0) == 1.0
    assert spike_time_b2(1.0, -0.5) == pytest.approx(3.5, abs=1e-12)


def test_discontinuity_golden(tmp_path):
    _, out = _invoke(tmp_path, "discontinuity", {})
    assert out.read_text() == (GOLDEN / "discontinuity.csv").read_text()


def test_fem_1d(tmp_path):
    result, out = _invoke(tmp_path, "fem", {"eps": 0.01, "grid_n": 51})
    assert result.exit_code == 0, result.output
    vals = {r[3]: float(r[4]) for r in _rows(out)[1:]}
    assert vals["bound"] == pytest.approx(0.01)
    assert vals["max_error"] <= vals["bound"]


def test_fem_mesh_file(tmp_path):
    mesh = {"vertices": [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], "simplices": [[0, 1, 3], [0, 3, 2]],
            "values": [0.0, 1.0, 1.0, 2.0]}
    (tmp_path / "mesh.json").write_text(json.dumps(mesh))
    result, out = _invoke(tmp_path, "fem", {"eps": 0.01, "grid_n": 11, "mesh_path": str(tmp_path / "mesh.json")})
    assert result.exit_code == 0, result.output
    vals = {r[3]: float(r[4]) for r in _rows(out)[1:]}
    assert vals["bound"] == pytest.approx(0.04)
    assert vals["max_error"] <= vals["bound"]


def test_fem_missing_mesh(tmp_path):
    result, _ = _invoke(tmp_path, "fem", {"mesh_path": str(tmp_path / "nope.json")})
    assert result.exit_code == 1


def test_fem_golden(tmp_path):
    _, out = _invoke(tmp_path, "fem", {"eps": 0.01, "grid_n": 21, "d0": 2, "n_per_axis": 2, "function": "sum"})
    assert out.read_text() == (GOLDEN / "fem_2d.csv").read_text()


def test_teacher_tiny_deterministic(tmp_path):
    cfg = {"seeds": [0, 1], "epochs": 2, "n_train": 64, "n_test": 32, "d0": 4, "teacher_width": 3,
           "snn_inputs": 4, "snn_hidden": 3, "relu_width": 3}
    r1, out1 = _invoke(tmp_path, "teacher", cfg, "a.csv")
    r2, out2 = _invoke(tmp_path, "teacher", cfg, "b.csv")
    assert r1.exit_code == 0 and r2.exit_code == 0, r1.output
    assert out1.read_bytes() == out2.read_bytes()
    rows = _rows(out1)[1:]
    models = {r[2].split(";")[0] for r in rows}
    assert models == {"model=linear", "model=relu", "model=snn_positive", "model=snn_general"}
    medians = [r for r in rows if r[1] == "all" and r[3] == "test_mse_median"]
    assert len(medians) == 4 * 3


def test_teacher_rejects_unknown_model(tmp_path):
    result, _ = _invoke(tmp_path, "teacher", {"seeds": [0], "models": ["cnn"]})
    assert result.exit_code == 1


def _synthetic_mnist(directory, n_train=40, n_test=20):
    rng = np.random.default_rng(0)
    directory.mkdir()
    for prefix, n in (("train", n_train), ("t10k", n_test)):
        y = np.arange(n) % 10
        x = rng.integers(0, 40, (n, 28, 28))
        for k in range(n):
            x[k, 2 * y[k] : 2 * y[k] + 4, :] = 255
        write_idx(directory / f"{prefix}-images-idx3-ubyte", x)
        write_idx(directory / f"{prefix}-labels-idx1-ubyte", y)


def test_mnist_synthetic(tmp_path):
    _synthetic_mnist(tmp_path / "data")
    cfg = {"seeds": [0], "data_dir": str(tmp_path / "data"), "subset_size": 30, "test_size": 10,
           "epochs": 1, "spiking_inputs": 6, "hidden": 5}
    r1, out1 = _invoke(tmp_path, "mnist", cfg, "a.csv")
    r2, out2 = _invoke(tmp_path, "mnist", cfg, "b.csv")
    assert r1.exit_code == 0, r1.output
    assert out1.read_bytes() == out2.read_bytes()
    rows = _rows(out1)[1:]
    counts = {r[2]: int(r[4]) for r in rows if r[3] == "n_samples"}
    assert counts == {"split=train": 30, "split=test": 10}
    errs = [float(r[4]) for r in rows if r[3] == "test_error"]
    assert len(errs) == 2 * 2 and all(0 <= e <= 1 for e in errs)


def test_mnist_zero_subset(tmp_path):
    _synthetic_mnist(tmp_path / "data")
    result, _ = _invoke(tmp_path, "mnist", {"seeds": [0], "data_dir": str(tmp_path / "data"), "subset_size": 0})
    assert result.exit_code == 1
    assert "subset_size" in result.output


def test_mnist_missing_dir(tmp_path):
    result, _ = _invoke(tmp_path, "mnist", {"seeds": [0], "data_dir": str(tmp_path / "none")})
    assert result.exit_code == 1


def test_bounds_json(tmp_path):
    net = random_affine_snn(np.random.default_rng(2))
    save_model(net, tmp_path / "model.json")
    cfg = {"model_path": str(tmp_path / "model.json"), "m": 10**6, "delta": 0.1, "eps": 0.01}
    result, out = _invoke(tmp_path, "bounds", cfg, "report.json")
    assert result.exit_code == 0, result.output
    rep = json.loads(out.read_text())
    assert rep["M"] > 0 and rep["L_star"] > 1 and rep["generalization_gap"] > 0
    assert isinstance(rep["sample_feasible"], bool)


def test_bounds_rejects_bad_delta(tmp_path):
    net = random_affine_snn(np.random.default_rng(2))
    save_model(net, tmp_path / "model.json")
    cfg = {"model_path": str(tmp_path / "model.json"), "m": 100, "delta": 2.0, "eps": 0.01}
    result, _ = _invoke(tmp_path, "bounds", cfg, "report.json")
    assert result.exit_code == 1


@pytest.mark.parametrize("value,ok", [("1", True), ("4", True), ("0", False), ("many", False)])
def test_thread_cap(tmp_path, value, ok):
    result, out = _invoke(tmp_path, "discontinuity", {}, env={"AFFINE_SNN_THREADS": value})
    assert (result.exit_code == 0) is ok
    if ok:
        assert out.read_text() == (GOLDEN / "discontinuity.csv").read_text()
