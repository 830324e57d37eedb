from __future__ import annotations

import shutil

import numpy as np
import pytest

from maxcond.cli import main
from maxcond.config import load_model_spec, read_observations, read_points
from maxcond.errors import ConfigError


def _run(*argv):
    return main([str(a) for a in argv])


def test_shipped_configs_load(configs):
    for name in ("max_linear_toy", "max_linear_line", "log_gaussian", "moving_max"):
        spec = load_model_spec(configs / f"{name}.yaml")
        assert spec.obs is not None and spec.held_out is not None


def test_config_error_has_line(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("model:\n  type: max-linear\n  grid: [0, 1]\n  profiles: [[1, 0.5, 2]]\n")
    with pytest.raises(ConfigError) as info:
        load_model_spec(p)
    assert info.value.line == 4
    p.write_text("model:\n  type: max-linear\n  grid: [0, 1]\n  profiles: [[1, 1]]\n  colour: red\n")
    with pytest.raises(ConfigError) as info:
        load_model_spec(p)
    assert info.value.line == 5
    p.write_text("model:\n  type: nonsense\n  grid: [0, 1]\n")
    with pytest.raises(ConfigError) as info:
        load_model_spec(p)
    assert info.value.line == 2


def test_observation_and_points_files(tmp_path, toy):
    o = tmp_path / "obs.csv"
    o.write_text("site_id,value\n0,1.3\n1,oops\n")
    with pytest.raises(ConfigError) as info:
        read_observations(o, toy.grid)
    assert info.value.line == 3
    pts = tmp_path / "pts.csv"
    pts.write_text("x,z\n2.0,0.5\n7.0,1.0\n")
    with pytest.raises(ConfigError) as info:
        read_points(pts, toy.grid)
    assert info.value.line == 3


def test_exit_codes(tmp_path, configs):
    assert _run("posterior", "--config", tmp_path / "none.yaml", "--seed", 1, "--out", tmp_path) == 2
    with pytest.raises(SystemExit):
        _run("posterior", "--config", configs / "max_linear_toy.yaml")  # seed missing
    bad = tmp_path / "obs.csv"
    bad.write_text("site_id,value\n0,0.7\n2,0.9\n")
    dep = tmp_path / "dep.yaml"
    dep.write_text("model:\n  type: log-gaussian\n  grid: [0, 1, 2]\n"
                   "  variogram: {type: power, scale: 1.0, exponent: 1.0}\n")
    assert _run("posterior", "--config", dep, "--seed", 1, "--out", tmp_path) == 2


def test_posterior_k1_single_row(tmp_path, configs):
    obs = tmp_path / "o.csv"
    obs.write_text("site_id,value\n1,2.0\n")
    assert _run("posterior", "--config", configs / "log_gaussian.yaml", "--obs", obs,
                "--seed", 1, "--out", tmp_path) == 0
    lines = (tmp_path / "posterior.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and "seed=1" in lines[0]
    assert lines[1:] == ["rgs_string,log_weight,pi", "0,-1.3862943611198906,1"]


@pytest.mark.parametrize("cfg", ["max_linear_toy.yaml", "moving_max.yaml", "log_gaussian.yaml"])
def test_simulate_deterministic(tmp_path, configs, cfg):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for d, thr in ((a, 1), (b, 1)):
        assert _run("simulate", "--config", configs / cfg, "--seed", 5, "--n", 300, "--out", d,
                    "--threads", thr, "--decompose", "0,1") == 0
    for f in ("fields.csv", "atoms.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_simulate_thread_invariant(tmp_path, configs):
    outs = []
    for thr in (1, 3):
        d = tmp_path / str(thr)
        assert _run("simulate", "--config", configs / "moving_max.yaml", "--seed", 5, "--n", 25000,
                    "--out", d, "--threads", thr) == 0
        outs.append((d / "fields.csv").read_bytes())
    assert outs[0] == outs[1]


def test_condition_cdf_and_plots(tmp_path, configs):
    assert _run("condition", "--config", configs / "max_linear_toy.yaml", "--seed", 2, "--n", 200,
                "--out", tmp_path, "--plot") == 0
    vals = np.loadtxt(tmp_path / "samples.csv", delimiter=",", skiprows=2, usecols=(0, 1, 4))
    at0 = vals[vals[:, 1] == 0, 2]
    assert np.all(at0 == 1.3)
    assert (tmp_path / "samples.png").stat().st_size > 0
    assert _run("cdf", "--config", configs / "max_linear_toy.yaml", "--obs", configs / "toy_obs.csv",
                "--points", configs / "toy_points.csv", "--seed", 2, "--out", tmp_path, "--plot") == 0
    cdf = np.loadtxt(tmp_path / "cdf.csv", delimiter=",", skiprows=2, usecols=(4,))
    assert np.all(np.diff(cdf) >= 0) and cdf[-1] == 1.0
    assert (tmp_path / "cdf.png").exists()


def test_validate_smoke(tmp_path, configs):
    code = _run("validate", "--config", configs / "validate.yaml", "--seed", 3, "--scale", 0.001,
                "--only", "3,7,9", "--out", tmp_path)
    assert code == 0
    lines = (tmp_path / "report.jsonl").read_text().splitlines()
    assert '"seed": 3' in lines[0] and "config_hash" in lines[0]
