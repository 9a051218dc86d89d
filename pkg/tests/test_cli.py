import json
import subprocess
import sys

import numpy as np
import pytest

from lifted_mfvi import __version__
from lifted_mfvi.cli import main, run
from lifted_mfvi.io import dumps, read_map_csv, write_map_csv
from lifted_mfvi.oracle import fixture_path
from lifted_mfvi.transport import QuantileGrid, TransportMap


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def report(out, name):
    return json.loads((out / name).read_text())


def test_dumps_is_sorted_and_17_digits():
    s = dumps({"b": 0.1, "a": [1, 2.5], "c": float("nan")})
    assert s.index('"a"') < s.index('"b"')
    assert "0.10000000000000001" in s
    assert '"c": null' in s
    assert json.loads(s)["b"] == 0.1


def test_map_csv_roundtrip(tmp_path):
    g = QuantileGrid.gaussian(9)
    T = TransportMap.affine(g, [0.1, -2.0], [1.0 / 3, 2.0])
    path = write_map_csv(tmp_path / "m.csv", T)
    assert path.read_text().splitlines()[0] == "i,j,u,t"
    R = read_map_csv(path)
    assert np.array_equal(R.values, T.values) and R.grid == g


def test_solve_gaussian(tmp_path):
    cfg = write(tmp_path, "c.yaml", "command: solve\npotential: {kind: gaussian, P: [[2, 1], [1, 2]]}\n")
    out = tmp_path / "out"
    assert run(cfg, out) == 0
    r = report(out, "solve.json")
    assert r["marginal_std"] == pytest.approx([0.7071, 0.7071], abs=1e-3)
    assert r["meta"]["version"] == __version__ and r["meta"]["seed"] == 0
    assert len(r["meta"]["config_hash"]) == 16
    assert (out / r["map_file"]).exists()


def test_solve_warm_start_from_map(tmp_path):
    cfg = write(tmp_path, "c.yaml", "command: solve\npotential: {kind: gaussian, P: [[2, 1], [1, 2]]}\n")
    assert run(cfg, tmp_path / "a") == 0
    cfg2 = write(tmp_path, "d.yaml", "command: solve\npotential: {kind: gaussian, P: [[2, 1], [1, 2]]}\n"
                 f"init_map: {tmp_path / 'a' / 'solve_map.csv'}\n")
    assert run(cfg2, tmp_path / "b") == 0
    missing = write(tmp_path, "e.yaml", "command: solve\npotential: {kind: standard_gaussian, d: 1}\n"
                    "init_map: nowhere.csv\n")
    assert run(missing, tmp_path / "c") == 3


def test_stability_mean_shift(tmp_path):
    cfg = write(tmp_path, "c.yaml", """
command: stability
potential: {kind: gaussian, P: [[1, 0], [0, 2]]}
potential_tilde: {kind: gaussian, P: [[1, 0], [0, 2]], mean: [0.5, 0]}
""")
    assert run(cfg, tmp_path) == 0
    r = report(tmp_path, "stability.json")
    assert r["bound_w2"] == pytest.approx(0.5)
    assert 0.475 <= r["measured_w2"] <= 0.5 + 1e-12
    assert set(r["envelope"]) == {"C", "log_C", "kl_upper", "second_moment_bound"}
    assert set(r["meta"]) >= {"seed", "n", "m", "config_hash", "version"}


def test_malformed_config_names_key(tmp_path, capsys):
    cfg = write(tmp_path, "c.yaml", "command: solve\npotential: {kind: gaussian, P: [[2, 1], [1, 2]], shift: 1}\n")
    assert run(cfg, tmp_path) == 3
    err = json.loads(capsys.readouterr().out)
    assert err["key"] == "potential.shift"
    assert report(tmp_path, "error.json")["key"] == "potential.shift"


@pytest.mark.parametrize("text,key", [
    ("command: fly\n", "command"),
    ("command: solve\n", "potential"),
    ("command: solve\npotential: {kind: gaussian, P: [[1, 2], [2, 1]]}\n", "potential.P"),
    ("command: solve\npotential: {kind: standard_gaussian, d: 2}\nsolver: {grid_m: 1}\n", "solver.grid_m"),
    ("command: solve\npotential: {kind: standard_gaussian, d: 2}\nsolver: {speed: 1}\n", "solver.speed"),
    ("command: control\nutility: {kind: zero, dim: 2}\nT_horizon: -1\n", "T_horizon"),
    ("command: solve\npotential: {kind: standard_gaussian, d: 2}\nextra: 1\n", "extra"),
    ("command: [unclosed\n", "config_path"),
])
def test_param_errors_exit_3(tmp_path, capsys, text, key):
    cfg = write(tmp_path, "c.yaml", text)
    assert run(cfg, tmp_path) == 3
    assert json.loads(capsys.readouterr().out)["key"] == key


def test_convergence_error_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, "c.yaml", "command: solve\npotential: {kind: logistic_fixture}\nsolver: {max_iters: 1}\n")
    assert run(cfg, tmp_path) == 2
    err = json.loads(capsys.readouterr().out)
    assert err["error"] == "ConvergenceError" and err["iterations"] == 1


def test_env_output_dir_override(tmp_path, monkeypatch):
    cfg = write(tmp_path, "c.yaml", f"command: solve\noutput_dir: {tmp_path / 'cfg'}\n"
                "potential: {kind: standard_gaussian, d: 1}\n")
    monkeypatch.setenv("LIFTED_MFVI_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "env" / "solve.json").exists()
    assert not (tmp_path / "cfg").exists()


def test_reports_byte_identical(tmp_path):
    cfg = write(tmp_path, "c.json", json.dumps({
        "command": "stability",
        "potential": {"kind": "logistic_fixture"},
        "potential_tilde": {"kind": "gaussian", "P": [[1.5, 0.2], [0.2, 1.0]]},
        "solver": {"seed": 11}}))
    assert run(cfg, tmp_path / "a") == 0
    assert run(cfg, tmp_path / "b") == 0
    for name in ("stability.json", "stability_map.csv", "stability_map_tilde.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("text,name,check", [
    ("command: sensitivity\nfamily: {kind: gaussian_precision_scale, dim: 1}\ntheta0: 1.0\n",
     "sensitivity.json", lambda r: r["coeffs"][0][1] == pytest.approx(-0.5, abs=5e-2) and r["fd_check"]["slope"] > 1.5),
    ("command: bvm\npotential: {kind: perturbed_quadratic, Q: [[2, 0.5], [0.5, 1]], mean: [0.3, -0.2], eta: 0.5}\nn: 20\n",
     "bvm.json", lambda r: r["measured_w2"] <= r["bound_local"] <= r["bound_smooth"]),
    ("command: linreg\nA: [[2, 0.3], [0.3, 1]]\nw: [1, -0.5]\ntau: 1.0\ntau_hat: 1.2\nn: 50\n",
     "linreg.json", lambda r: r["measured_w2"] <= r["bound_w2"] and r["bvm"]["measured_w2"] <= 1e-2),
    ("command: prior-swap\nlikelihood: {kind: logistic_fixture}\nprior: {var: 1.0}\nprior_tilde: {mean: 0.2, var: 1.0}\n",
     "prior_swap.json", lambda r: r["interval"][0] <= r["statistic_under_prior"] <= r["interval"][1]),
    ("command: contamination\np: {mean: [0.0], var: 1.0}\nq: {mean: [1.0], var: 1.0}\neps: 0.1\n",
     "contamination.json", lambda r: r["alpha_eps"] == 0.75 and r["bound_w2"] > 0),
    ("command: control\nutility: {kind: linear, c: [0.5, -1.0]}\nutility_tilde: {kind: linear, c: [0.6, -0.8]}\nT_horizon: 2.0\n",
     "control.json", lambda r: r["measured_diff"] == pytest.approx(0.25, abs=1e-9) and r["bound"] >= 0.25),
    ("command: cavi\npotential: {kind: gaussian, P: [[2, 1], [1, 2]]}\ncompare: true\n",
     "cavi.json", lambda r: r["lp_distance_vs_lifted"] <= 5e-3),
])
def test_subcommands(tmp_path, text, name, check):
    cfg = write(tmp_path, "c.yaml", text)
    assert run(cfg, tmp_path) == 0
    assert check(report(tmp_path, name))


def test_oracle_check_subset_and_corrupted_fixture(tmp_path, capsys):
    assert main(["oracle-check", "--criteria", "8", "--output-dir", str(tmp_path / "ok")]) == 0
    assert "PASS" in capsys.readouterr().out
    fx = json.loads(fixture_path().read_text())
    fx["marginals"][0]["density"] = fx["marginals"][0]["density"][::-1]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(fx))
    code = main(["oracle-check", "--criteria", "9", "--fixture", str(bad), "--output-dir", str(tmp_path / "bad")])
    assert code == 1
    out = capsys.readouterr().out
    assert "Cross-solver agreement" in out and "FAIL" in out
    r = report(tmp_path / "bad", "oracle_check.json")
    assert r["criteria"][0]["id"] == 9 and not r["criteria"][0]["passed"]


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, "c.yaml", "command: solve\npotential: {kind: standard_gaussian, d: 1}\n")
    res = subprocess.run([sys.executable, "-m", "lifted_mfvi", "solve", str(cfg), "--output-dir", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "solve.json").exists()


def test_oracle_check_reports_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert main(["oracle-check", "--criteria", "4", "8", "--output-dir", str(tmp_path / sub)]) == 0
    assert (tmp_path / "a" / "oracle_check.json").read_bytes() == (tmp_path / "b" / "oracle_check.json").read_bytes()
