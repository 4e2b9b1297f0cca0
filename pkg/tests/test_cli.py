import csv
import json
import math

import pytest
from click.testing import CliRunner

from core.cli import EXIT_CONFIG, EXIT_IO, EXIT_REJECTED, EXIT_RESIDUAL, cli, exit_code_for
from core.errors import ConfigError, LatticeError, SingularMatrixError, ZeroNotFoundError


@pytest.fixture
def runner():
    return CliRunner()


def _run(runner, args):
    return runner.invoke(cli, args, catch_exceptions=False)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


def _read_json(path):
    with open(path, encoding="utf-8") as f:
        return json.load(f)


# ---- Exit status mapping ----

def test_exit_codes():
    assert exit_code_for(ConfigError("x")) == EXIT_CONFIG
    assert exit_code_for(SingularMatrixError("x")) == EXIT_RESIDUAL
    assert exit_code_for(ZeroNotFoundError("x")) == EXIT_RESIDUAL
    assert exit_code_for(LatticeError("x")) == EXIT_REJECTED
    assert exit_code_for(PermissionError("x")) == EXIT_IO


# ---- spline / zak ----

def test_spline_hat_samples(runner, tmp_path):
    out = tmp_path / "hat.csv"
    res = _run(runner, ["spline", "--rates", "0,0", "--samples", "5", "--out", str(out)])
    assert res.exit_code == 0
    rows = _read_csv(out)
    assert rows[0] == ["x", "value"]
    xs = [float(r[0]) for r in rows[1:]]
    vals = [float(r[1]) for r in rows[1:]]
    assert xs == [0.0, 0.5, 1.0, 1.5, 2.0]
    assert all(abs(v - e) <= 1e-15 for v, e in zip(vals, [0.0, 0.5, 1.0, 0.5, 0.0]))


def test_spline_json_with_closed_form_check(runner, tmp_path):
    out = tmp_path / "s.json"
    res = _run(runner, ["spline", "--rates", "1,-1", "--samples", "9", "--check-cm", "--format", "json", "--out", str(out)])
    assert res.exit_code == 0
    doc = _read_json(out)
    assert doc["config"]["command"] == "spline"
    assert doc["result"]["m"] == 2
    assert doc["residuals"]["christensen_massopust"] <= 1e-10


def test_zak_zero_of_hat(runner, tmp_path):
    out = tmp_path / "zero.json"
    res = _run(runner, ["zak", "zero", "--rates", "0,0", "--scan", "64", "--format", "json", "--out", str(out)])
    assert res.exit_code == 0
    doc = _read_json(out)
    assert abs(doc["result"]["x_zero"] - 0.5) <= 1e-12
    assert doc["result"]["omega_zero"] == 0.5


def test_zak_verify_passes(runner, tmp_path):
    res = _run(runner, ["zak", "verify", "--rates", "-2,-1,1,2", "--samples", "20", "--out", str(tmp_path / "v.csv")])
    assert res.exit_code == 0
    rows = _read_csv(tmp_path / "v.csv")
    assert [r[0] for r in rows[1:]] == ["periodicity", "quasi_periodicity", "scaling"]


def test_zak_factor_check(runner, tmp_path):
    res = _run(runner, ["zak", "factor-check", "--poles", "1,-1", "--alpha", "0.7", "--n", "16", "--out", str(tmp_path / "f.csv")])
    assert res.exit_code == 0
    res = runner.invoke(cli, ["zak", "factor-check", "--rates", "1,2", "--alpha", "0.7"])
    assert res.exit_code == EXIT_CONFIG


def test_residual_failure_exit(runner, tmp_path, monkeypatch):
    import core.frames.zak as zak_mod

    monkeypatch.setattr(
        zak_mod, "identity_residuals",
        lambda e, samples, seed: {"periodicity": 1.0, "quasi_periodicity": 0.0, "scaling": 0.0},
    )
    res = runner.invoke(cli, ["zak", "verify", "--rates", "0,0", "--out", str(tmp_path / "v.csv")])
    assert res.exit_code == EXIT_RESIDUAL
    # the report is still written before the check fails
    assert (tmp_path / "v.csv").exists()


# ---- dual ----

def test_dual_rejects_unsupported_lattice(runner):
    res = runner.invoke(cli, ["dual", "--rates", "1,2,3", "--alpha", "1.5", "--beta", "0.6"])
    assert res.exit_code == EXIT_REJECTED


def test_dual_needs_exactly_one_beta(runner):
    res = runner.invoke(cli, ["dual", "--rates", "1,2,3", "--alpha", "2", "--beta", "0.45", "--beta-frac", "9/20"])
    assert res.exit_code == EXIT_CONFIG
    res = runner.invoke(cli, ["dual", "--rates", "1,2,3", "--alpha", "2"])
    assert res.exit_code == EXIT_CONFIG


def test_dual_output_is_deterministic(runner, tmp_path):
    args = ["dual", "--rates", "1,2,3", "--alpha", "2", "--beta-frac", "9/20", "--grid-points", "9"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(runner, args + ["--out", str(a)]).exit_code == 0
    assert _run(runner, args + ["--out", str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    rows = _read_csv(a)
    assert rows[0] == ["x", "gamma", "discontinuity"]
    assert {r[2] for r in rows[1:]} <= {"0", "1"}


def test_dual_json_residuals(runner, tmp_path):
    out = tmp_path / "d.json"
    res = _run(runner, ["dual", "--rates", "-2,-1,1,2", "--beta", "0.86", "--grid-points", "17", "--format", "json", "--out", str(out)])
    assert res.exit_code == 0
    doc = _read_json(out)
    assert doc["residuals"]["duality"] <= 1e-9
    assert doc["config"]["lattice"]["rational_form"] == [43, 50]


# ---- bounds ----

def test_bounds_formula_value(runner, tmp_path):
    out = tmp_path / "f.json"
    res = _run(runner, ["bounds", "formula", "--family", "eb2", "--beta", "0.4", "--format", "json", "--out", str(out)])
    assert res.exit_code == 0
    doc = _read_json(out)
    assert math.isclose(doc["result"]["lower"], 2.0 * math.sinh(0.5) ** 2 / 0.4, rel_tol=1e-12)
    assert doc["result"]["method"] == "closed_form_case1"


def test_bounds_optimal_zak_needs_n(runner):
    res = runner.invoke(cli, ["bounds", "optimal", "--rates", "1,-1", "--method", "zak"])
    assert res.exit_code == EXIT_CONFIG


def test_bounds_optimal_rational(runner, tmp_path):
    out = tmp_path / "o.csv"
    res = _run(runner, ["bounds", "optimal", "--rates", "1,-1", "--beta-frac", "1/2", "--max", "256", "--out", str(out)])
    assert res.exit_code == 0
    header, row = _read_csv(out)
    rec = dict(zip(header, row))
    assert rec["method"] == "optimal_rational"
    assert math.isclose(float(rec["lower"]), 4.0 * math.sinh(0.5) ** 2, rel_tol=1e-9)


def test_bounds_start_above_cap(runner):
    res = runner.invoke(cli, ["bounds", "optimal", "--rates", "1,-1", "--beta", "0.5", "--start", "512", "--max", "256"])
    assert res.exit_code == EXIT_CONFIG


def test_small_sweep(runner, tmp_path):
    out = tmp_path / "sweep.csv"
    res = _run(runner, [
        "bounds", "sweep", "--k-min", "59", "--k-max", "60", "--max", "256", "--workers", "1", "--out", str(out),
    ])
    assert res.exit_code == 0
    rows = _read_csv(out)
    assert rows[0] == ["panel", "k", "beta", "A_formula", "A_opt", "B_opt"]
    assert [r[0] for r in rows[1:]] == ["eb2", "eb2", "tp2", "tp2"]
    for r in rows[1:]:
        assert float(r[3]) <= float(r[4]) <= float(r[5])


def test_sweep_is_also_figure3(runner, tmp_path):
    args = ["--k-min", "60", "--k-max", "60", "--max", "256", "--workers", "1"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert _run(runner, ["bounds", "sweep", *args, "--out", str(a)]).exit_code == 0
    assert _run(runner, ["bounds", "figure3", *args, "--out", str(b)]).exit_code == 0
    assert a.read_bytes() == b.read_bytes()
    doc = tmp_path / "f.json"
    assert _run(runner, ["bounds", "figure3", *args, "--format", "json", "--out", str(doc)]).exit_code == 0
    assert _read_json(doc)["config"]["command"] == "bounds figure3"


# ---- config / global flags ----

def test_config_validate(runner, repo_root, tmp_path):
    res = runner.invoke(cli, ["config", "validate", str(repo_root / "config" / "defaults.yaml")])
    assert res.exit_code == 0
    assert "Config valid" in res.output

    bad = tmp_path / "bad.yaml"
    bad.write_text("zak:\n  scan: -1\noptimal:\n  start: 512\n  max: 256\n", encoding="utf-8")
    res = runner.invoke(cli, ["config", "validate", str(bad)])
    assert res.exit_code == EXIT_CONFIG
    assert "zak.scan must be positive" in res.output


def test_missing_config_file(runner, tmp_path):
    res = runner.invoke(cli, ["--config", str(tmp_path / "nope.yaml"), "spline", "--rates", "0,0"])
    assert res.exit_code == EXIT_CONFIG


def test_config_from_env(runner, tmp_path, monkeypatch):
    cfg = tmp_path / "d.yaml"
    cfg.write_text("spline:\n  samples: 3\n", encoding="utf-8")
    monkeypatch.setenv("GABOR_EB_CONFIG", str(cfg))
    out = tmp_path / "s.csv"
    assert _run(runner, ["spline", "--rates", "0,0", "--out", str(out)]).exit_code == 0
    assert len(_read_csv(out)) == 4


def test_config_tolerances_reach_the_numerics(runner, tmp_path):
    loose = tmp_path / "loose.yaml"
    loose.write_text("tolerances:\n  zak_tail: 1.0e-3\n  pinv_rcond: 0.999\n", encoding="utf-8")
    base = ["--config", str(loose)]
    res = runner.invoke(cli, [*base, "zak", "factor-check", "--poles", "1,-1", "--alpha", "0.7", "--n", "16"])
    assert res.exit_code == EXIT_RESIDUAL
    res = runner.invoke(cli, [*base, "zak", "zero", "--poles", "1,-1", "--scan", "32"])
    assert res.exit_code == EXIT_RESIDUAL
    res = runner.invoke(cli, [*base, "dual", "--rates", "-2,-1,1,2", "--beta", "0.86", "--grid-points", "3", "--extra-cols", "2"])
    assert res.exit_code == EXIT_RESIDUAL
    # the square solve does not use pinv_rcond
    out = tmp_path / "d.csv"
    res = _run(runner, [*base, "dual", "--rates", "-2,-1,1,2", "--beta", "0.86", "--grid-points", "3", "--out", str(out)])
    assert res.exit_code == 0


def test_unwritable_output(runner, tmp_path):
    res = runner.invoke(cli, ["spline", "--rates", "0,0", "--out", str(tmp_path / "missing" / "x.csv")])
    assert res.exit_code == EXIT_IO


def test_bad_rates_are_usage_errors(runner):
    res = runner.invoke(cli, ["spline", "--rates", "a,b"])
    assert res.exit_code == EXIT_CONFIG
