import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from sigmak import grid as g
from sigmak.cli import main
from sigmak.config import ConfigError, boundary_slice, parse_config


def write(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(tmp_path, mode, cfg, *extra, name="run.json"):
    out = tmp_path / f"out_{name.removesuffix('.json')}"
    code = main([mode, "--config", write(tmp_path, cfg, name), "--out", str(out), *extra])
    return code, out


CERT = {"mode": "certify", "n": 2, "k": 1, "samples": 200, "seed": 3}


# -- configuration parsing


def test_minimal_certify_config():
    cfg = parse_config(json.dumps(CERT))
    assert (cfg.n, cfg.k, cfg.samples, cfg.seed) == (2, 1, 200, 3)


@pytest.mark.parametrize(
    "patch,where",
    [
        ({"k": 2, "n": 3}, "k"),
        ({"bogus": 1}, "bogus"),
        ({"u0": {"family": "cosine", "amplitude": 0.1, "modes": [1, 0], "extra": 2}}, "u0.extra"),
        ({"solver": {"newton_tol": -1.0}}, "solver.newton_tol"),
        ({"N": 2}, "N"),
        ({"mode": "solve", "resolutions": [[0, 5], [8, 9]]}, "resolutions[0][0]"),
        ({"mode": "export", "N": 8, "levels": [0, 12]}, "levels[1]"),
        ({"f": {"type": "constant", "value": 0}}, "f.value"),
    ],
)
def test_config_errors_name_the_field(patch, where):
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(CERT | patch))
    assert exc.value.path == where
    assert str(exc.value).startswith(where)


@pytest.mark.parametrize("missing", ["mode", "n", "k", "samples", "seed"])
def test_missing_required_field(missing):
    cfg = dict(CERT)
    del cfg[missing]
    with pytest.raises(ConfigError, match=missing):
        parse_config(json.dumps(cfg))


def test_invalid_json():
    with pytest.raises(ConfigError, match="invalid JSON"):
        parse_config("{")


def test_defaults_for_geometry_modes():
    cfg = parse_config(json.dumps({"mode": "verify", "n": 2, "k": 1, "N": 8}))
    assert cfg.Nt == 9
    assert cfg.resolutions == [[8, 9], [16, 19]]
    cfg = parse_config(json.dumps({"mode": "export", "n": 2, "k": 1, "N": 8}))
    assert cfg.levels == [0, 5, 10]


def test_cosine_boundary_roundtrip():
    text = json.dumps(
        {
            "mode": "solve", "n": 2, "k": 1, "N": 8,
            "u0": {"family": "cosine", "amplitude": 0.2, "modes": [1, 2], "phase": 0.5},
            "u1": {"family": "two-mode", "amplitudes": [0.1, -0.1], "modes": [[1, 0], [0, 1]]},
        }
    )
    cfg = parse_config(text)
    geom = cfg.geometry()
    X = geom.coords()
    np.testing.assert_allclose(boundary_slice(cfg.u0, geom), 0.2 * np.cos(X[0] + 2 * X[1] + 0.5))
    np.testing.assert_allclose(boundary_slice(cfg.u1, geom), 0.1 * np.cos(X[0]) - 0.1 * np.cos(X[1]))
    again = cfg.to_dict()
    assert parse_config(json.dumps(again)).to_dict() == cfg.to_dict()


def test_file_boundary(tmp_path):
    geom = g.GridGeometry(2, 1, 8, 9)
    vals = np.random.default_rng(0).normal(size=geom.slice_shape) * 0.01
    vals.astype("<f8").tofile(tmp_path / "u0.bin")
    cfg = parse_config(
        json.dumps({"mode": "solve", "n": 2, "k": 1, "N": 8, "u0": {"family": "file", "path": "u0.bin"}}),
        base_dir=tmp_path,
    )
    np.testing.assert_array_equal(boundary_slice(cfg.u0, geom), vals)


# -- command line


def test_certify_run(tmp_path):
    code, out = run(tmp_path, "certify", CERT)
    assert code == 0
    for name in ("cert_report.json", "cert_summary.csv", "cert_summary.png", "resolved_config.json", "metadata.json"):
        assert (out / name).exists(), name
    rep = json.loads((out / "cert_report.json").read_text())
    assert rep[0]["real_rooted"] and rep[0]["samples"] == 200
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["exit_code"] == 0 and "wall_time" in meta


def test_certify_is_deterministic(tmp_path):
    _, a = run(tmp_path, "certify", CERT, "--no-figures", name="a.json")
    _, b = run(tmp_path, "certify", CERT, "--no-figures", name="b.json")
    for name in ("cert_report.json", "cert_summary.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert not (a / "cert_summary.png").exists()


def test_bad_config_exits_1(tmp_path, capsys):
    code, _ = run(tmp_path, "certify", CERT | {"n": 3, "k": 2})
    assert code == 1
    assert "2k <= n" in capsys.readouterr().err


def test_mode_mismatch_exits_1(tmp_path, capsys):
    code, _ = run(tmp_path, "solve", CERT)
    assert code == 1
    assert "mode" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert main(["certify", "--config", str(tmp_path / "nope.json")]) == 1


def test_homogeneous_sweep(tmp_path):
    cfg = {"mode": "sweep", "n": 2, "k": 1, "N": 4, "Nt": 5, "solver": {"s_levels": 4}}
    code, out = run(tmp_path, "sweep", cfg, "--no-figures")
    assert code == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert [float(r["s"]) for r in rows] == [1.0, 0.5, 0.25, 0.125, 0.0625]
    assert max(float(r["closed_form_error"]) for r in rows) <= 1e-9
    limit = g.load_field(out / "limit")
    geom = limit.geometry
    exact = g.comparison_field(geom, -g.homogeneous_constant(geom, 0.0625), 0.0, 0.0)
    assert np.abs(limit.values - exact.values).max() <= 1e-9


def test_solve_manufactured(tmp_path):
    cfg = {"mode": "solve", "n": 2, "k": 1, "N": 8, "Nt": 7, "f": {"type": "manufactured"}}
    code, out = run(tmp_path, "solve", cfg)
    assert code == 0
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["converged"] and "wall_time" not in rep
    bounds = json.loads((out / "bounds.json").read_text())
    assert bounds["error_vs_exact"] < 1e-2
    assert (out / "residual_history.png").exists() and (out / "solution_t004.png").exists()
    hist = np.loadtxt(out / "residual_history.csv", delimiter=",", skiprows=1)
    assert hist[-1, 1] <= rep["target"]


def test_path_mode(tmp_path):
    cfg = {
        "mode": "path", "n": 2, "k": 1, "N": 8,
        "u0": {"family": "cosine", "amplitude": 0.1, "modes": [1, 0]},
        "f": {"type": "constant", "value": 0.5},
    }
    code, out = run(tmp_path, "path", cfg, "--no-figures", "--threads", "1")
    assert code == 0
    rep = json.loads((out / "solve_report.json").read_text())
    assert rep["path"]["converged"] and rep["path"]["steps"][-1] == 1.0
    assert os.environ["OMP_NUM_THREADS"] == "1"


def test_verify_mode(tmp_path):
    cfg = {
        "mode": "verify", "n": 2, "k": 1,
        "u1": {"family": "cosine", "amplitude": 0.1, "modes": [0, 1]},
        "resolutions": [[8, 9], [16, 17]],
    }
    code, out = run(tmp_path, "verify", cfg)
    assert code == 0
    rows = list(csv.DictReader((out / "bounds.csv").open()))
    assert [int(r["N"]) for r in rows] == [8, 16]
    assert all(float(r["c0_low_slack"]) >= -1e-9 for r in rows)
    assert (out / "bounds.png").exists()


def test_export_slices(tmp_path):
    cfg = {"mode": "export", "n": 2, "k": 1, "N": 6, "levels": [0, 3]}
    code, out = run(tmp_path, "export", cfg, "--no-figures")
    assert code == 0
    field = g.load_field(out / "field")
    data = np.loadtxt(out / "slice_t003.csv", delimiter=",", skiprows=1)
    assert data.shape == (36, 3)
    np.testing.assert_array_equal(data[:, 2], field.values[3].ravel())
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["levels"] == [0, 3] and resolved["Nt"] == 7
    assert parse_config((out / "resolved_config.json").read_text()).to_dict() == resolved


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, CERT)
    proc = subprocess.run(
        [sys.executable, "-m", "sigmak.cli", "certify", "--config", cfg, "--out", str(tmp_path / "o"), "--no-figures"],
        capture_output=True, text=True, timeout=300,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "o" / "cert_report.json").exists()
