import csv
import json
import subprocess
import sys

import pytest

from qkdbound.cli import CURVE_COLUMNS, run


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_threshold_junk(capsys):
    code, out, _ = call(capsys, "threshold", "--d", "2", "--N", "2", "--L", "0.1", "--model", "junk")
    assert code == 0
    assert "0.354838710" in out
    data = json.loads(out)
    assert data["zero_key_threshold"] == pytest.approx(0.35483871, abs=1e-9)
    assert data["conventions_agree"] is True


def test_threshold_uniform_both_conventions(capsys):
    code, out, _ = call(capsys, "threshold", "--L", "0.1", "--convention", "stated")
    data = json.loads(out)
    assert data["zero_key_threshold"] == pytest.approx(0.404761905, abs=1e-9)
    assert data["zero_key_threshold_derived"] == pytest.approx(0.357142857, abs=1e-9)


def test_repeater_json(capsys):
    code, out, _ = call(capsys, "repeater", "--v", "0.95", "--L", "0.1")
    assert code == 0
    data = json.loads(out)
    assert data["n_max_derived"] == 10 and data["n_max_stated"] == 8


def test_repeater_csv_and_svg(tmp_path, capsys):
    csv_path, svg_path = tmp_path / "rep.csv", tmp_path / "rep.svg"
    code, _, _ = call(capsys, "repeater", "--v", "0.95", "--L", "0.1", "--settings", "computational",
                      "--n-max", "12", "--csv", str(csv_path), "--svg", str(svg_path))
    assert code == 0
    rows = list(csv.DictReader(csv_path.open()))
    assert len(rows) == 13 and float(rows[0]["rate_bits"]) > 0 and float(rows[12]["rate_bits"]) == 0
    assert svg_path.read_text().count("<polyline") == 1


def test_rate_curve_anchor(capsys):
    code, out, _ = call(capsys, "rate-curve", "--d", "2", "--N", "2", "--L", "0", "--model", "uniform",
                        "--v-min", "0.99", "--v-max", "1.0", "--steps", "2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].split(",") == CURVE_COLUMNS
    assert lines[-1].split(",")[1] == "1.000000000"


def test_rate_curve_roundtrip_and_determinism(tmp_path, capsys):
    args = ["rate-curve", "--L", "0.2", "--v-min", "0.3", "--v-max", "1", "--steps", "8",
            "--settings", "computational"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert call(capsys, *args, "--out", str(a), "--svg", str(tmp_path / "a.svg"))[0] == 0
    assert call(capsys, *args, "--out", str(b), "--svg", str(tmp_path / "b.svg"))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    from qkdbound import LeakageModel, SettingsSpace, rate_curve
    import numpy as np

    bounds = rate_curve(2, 2, LeakageModel.uniform(0.2), np.linspace(0.3, 1, 8), SettingsSpace("computational"))
    rows = list(csv.DictReader(a.open()))
    for row, bnd in zip(rows, bounds):
        assert float(row["v"]) == float(f"{bnd.v:.9f}")
        assert float(row["rate_bits"]) == float(f"{bnd.rate:.9f}")
        assert float(row["p_question"]) == float(f"{bnd.p_question:.9f}")


def test_rate_curve_several_leakages(tmp_path, capsys):
    out = tmp_path / "fig.csv"
    code, _, _ = call(capsys, "rate-curve", "--L", "0.1,0.2,0.3", "--v-min", "0.4", "--v-max", "1", "--steps", "3",
                      "--settings", "computational", "--out", str(out), "--svg", str(tmp_path / "fig.svg"))
    assert code == 0
    for L in ("0.1", "0.2", "0.3"):
        assert (tmp_path / f"fig_L{L}.csv").exists()
    assert (tmp_path / "fig.svg").read_text().count("<polyline") == 3


def test_gamma_check(capsys):
    code, out, _ = call(capsys, "gamma-check", "--v", "0.38", "--L", "0.1")
    data = json.loads(out)
    assert code == 0 and data["feasible"] is False
    assert data["gamma"][1] == pytest.approx(2.032258065, abs=1e-9)
    assert data["zero_key_threshold_stated"] == pytest.approx(0.404761905, abs=1e-9)


def test_simulate(tmp_path, capsys):
    path = tmp_path / "sim.json"
    code, _, _ = call(capsys, "simulate", "--v", "0.6", "--L", "0.2", "--rounds", "50000", "--seed", "4",
                      "--gamma", "closed", "--out", str(path))
    assert code == 0
    first = path.read_bytes()
    call(capsys, "simulate", "--v", "0.6", "--L", "0.2", "--rounds", "50000", "--seed", "4",
         "--gamma", "closed", "--out", str(path))
    assert path.read_bytes() == first
    data = json.loads(first)
    assert data["rounds"] == 50000 and abs(sum(data["class_masses"].values()) - 1) < 1e-9


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults\nd=2\nN=2\nL=0.1\nmodel=junk\n")
    code, out, _ = call(capsys, "threshold", "--config", str(cfg))
    assert json.loads(out)["zero_key_threshold"] == pytest.approx(0.35483871, abs=1e-9)
    code, out, _ = call(capsys, "threshold", "--config", str(cfg), "--model", "uniform")
    assert json.loads(out)["model"] == "uniform"
    cfg.write_text("v-min=0.99\nv_max=1.0\nsteps=2\nL=0\nsettings=computational\n")
    code, out, _ = call(capsys, "rate-curve", "--config", str(cfg))
    assert code == 0 and out.strip().splitlines()[-1].split(",")[1] == "1.000000000"


@pytest.mark.parametrize("argv", [
    ["threshold", "--bogus"],
    ["threshold", "--L", "1.5"],
    ["threshold", "--d", "1"],
    ["threshold", "--model", "sometimes"],
    ["threshold", "--config", "/nonexistent/cfg"],
    ["rate-curve", "--steps", "0"],
    ["rate-curve", "--settings", "xz", "--d", "3"],
    ["rate-curve", "--setting", "zbasis", "--steps", "2"],
    ["gamma-check", "--v", "0.2"],
    ["simulate", "--v", "0.5", "--rounds", "0"],
    ["simulate", "--v", "0.5", "--setting", "xz:abc;zbasis"],
    ["repeater", "--exponent", "hops"],
    ["frobnicate"],
])
def test_usage_errors(capsys, argv):
    code, out, err = call(capsys, *argv)
    assert code == 2
    assert err.strip()


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour=blue\n")
    code, _, err = call(capsys, "threshold", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_unwritable_output(capsys):
    code, _, err = call(capsys, "threshold", "--out", "/nonexistent/dir/out.json")
    assert code == 1 and err.count("\n") == 1


def test_bad_threads_env(monkeypatch, capsys):
    monkeypatch.setenv("QKDBOUND_THREADS", "zero")
    code, _, _ = call(capsys, "rate-curve", "--steps", "2", "--settings", "computational")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qkdbound", "threshold", "--L", "0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["zero_key_threshold"] == pytest.approx(1 / 3, abs=1e-9)
    proc = subprocess.run([sys.executable, "-m", "qkdbound", "--help"], capture_output=True, text=True)
    assert "derived" in proc.stdout and "uniform" in proc.stdout
