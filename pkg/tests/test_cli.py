import csv
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kenergy import functionals
from kenergy.chern import linear_path
from kenergy.cli import (
    CONVERGENCE_COLUMNS,
    TRAJECTORY_COLUMNS,
    ConfigError,
    RunConfig,
    build_potential,
    main,
)


def run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*argv, "--out", str(out)])
    report = json.loads(out.read_text()) if out.exists() else None
    return code, report


def strip_times(obj):
    if isinstance(obj, dict):
        return {k: strip_times(v) for k, v in obj.items() if k != "wall_time"}
    if isinstance(obj, list):
        return [strip_times(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# configuration


configs = st.builds(
    RunConfig,
    manifold=st.sampled_from(["CP1", "CP2"]),
    resolution=st.lists(st.integers(8, 40), min_size=2, max_size=3).map(tuple),
    k=st.lists(st.integers(1, 1), max_size=1).map(tuple),
    suites=st.lists(st.sampled_from(["reference", "euler", "theorem1"]), max_size=3).map(tuple),
    quantity=st.sampled_from(["M", "F", "L", "mu", "lambda"]),
    method=st.sampled_from(["path", "lemma51", "cor52", "nopath"]),
    coefficients=st.lists(st.floats(-1, 1, allow_nan=False), max_size=4).map(tuple),
    n_t=st.integers(1, 64),
    seed=st.integers(0, 10**6),
    scale=st.floats(1e-3, 1.0),
    tol=st.one_of(st.none(), st.floats(1e-12, 1e-2)),
    epsilon=st.floats(0.0, 0.5),
    out=st.sampled_from(["report.json", "out/run.json"]),
)


@given(configs)
def test_config_round_trip(cfg):
    cfg = cfg.validate()
    text = cfg.to_text()
    again = RunConfig.from_text(text)
    assert again == cfg
    assert again.to_text() == text


def test_config_accepts_section_header_and_comments():
    cfg = RunConfig.from_text("[run]\n# comment\nmanifold = CP2\nk = 1, 2  # both\nn-t = 8\n")
    assert cfg.manifold == "CP2" and cfg.k == (1, 2) and cfg.n_t == 8


@pytest.mark.parametrize(
    "text,line,key",
    [
        ("manifold = CP1\nn_t = 16\nsamples = many\n", 3, "samples"),
        ("manifold = CP3\n", 1, "manifold"),
        ("manifold = CP1\n\nk = 2\n", 3, "k"),
        ("seed = 1\nbogus = 3\n", 2, "bogus"),
        ("suites = theorem1, nonsense\n", 1, "suites"),
        ("tol = -1\n", 1, "tol"),
    ],
)
def test_config_errors_name_line_and_field(text, line, key):
    with pytest.raises(ConfigError) as info:
        RunConfig.from_text(text)
    assert info.value.line == line
    assert info.value.key == key
    assert f"line {line}" in str(info.value) and key in str(info.value)


def test_config_syntax_error_has_a_line():
    with pytest.raises(ConfigError) as info:
        RunConfig.from_text("manifold = CP1\nthis line has no delimiter\n")
    assert info.value.line == 2


def test_build_potential_rejects_too_many_coefficients():
    cfg = RunConfig(family="zonal", coefficients=(0.1, 0.1, 0.1, 0.1), degrees=(2, 3))
    with pytest.raises(ConfigError):
        build_potential(cfg)


# ---------------------------------------------------------------------------
# commands


def test_verify_passes_and_reports(tmp_path, capsys):
    code, rep = run(tmp_path, "verify", "--suite", "theorem1,reference", "--manifold", "CP1")
    assert code == 0
    assert rep["summary"]["pass"] and rep["summary"]["failed"] == 0
    recs = rep["records"]
    assert {r["check"].split("/")[0] for r in recs} == {"theorem1", "reference"}
    required = {"check", "anchor", "lhs", "rhs", "abs_err", "rel_err", "tolerance", "pass", "grid", "wall_time"}
    for r in recs:
        assert required <= set(r) and r["anchor"]
    assert rep["reference"]["mu"][1] == pytest.approx(1 / math.pi)
    assert "PASS" in capsys.readouterr().out


def test_verify_without_suites_is_a_config_error(tmp_path, capsys):
    code, rep = run(tmp_path, "verify")
    assert code == 2 and rep is None
    assert "no checks selected" in capsys.readouterr().err


def test_unknown_suite_is_a_config_error(tmp_path):
    code, _ = run(tmp_path, "verify", "--suite", "nope")
    assert code == 2


def test_failing_record_gives_exit_one(tmp_path):
    code, rep = run(tmp_path, "verify", "--suite", "reference", "--tol", "1e-30")
    assert code == 1
    assert rep["summary"]["failed"] >= 1 and not rep["summary"]["pass"]


def test_reports_are_deterministic_apart_from_timing(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    args = ["verify", "--suite", "reference,formulas", "--set", "samples=1"]
    assert run(a, *args)[0] == 0
    assert run(b, *args)[0] == 0
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    ra["config"].pop("out"), rb["config"].pop("out")
    assert strip_times(ra) == strip_times(rb)


def test_config_file_and_flag_precedence(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("manifold = CP1\nsuites = euler\nsamples = 1\n")
    code, rep = run(tmp_path, "verify", "--config", str(conf), "--suite", "reference")
    assert code == 0
    assert rep["config"]["suites"] == ["reference"] and rep["config"]["samples"] == 1


def test_bad_config_file_gives_exit_two(tmp_path, capsys):
    conf = tmp_path / "run.cfg"
    conf.write_text("manifold = CP1\nn_t = zero\n")
    code, _ = run(tmp_path, "verify", "--config", str(conf))
    assert code == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "n_t" in err


def test_compute_mu_with_convergence_table(tmp_path):
    code, rep = run(tmp_path, "compute", "--set", "quantity=mu", "--k", "1")
    assert code == 0
    assert rep["value"] == pytest.approx(1 / math.pi, abs=1e-8)
    with open(rep["convergence_csv"]) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == CONVERGENCE_COLUMNS
    assert [int(r["level"]) for r in rows] == [0, 1, 2]
    nodes = [int(r["nodes"]) for r in rows]
    assert nodes == sorted(nodes) and nodes[0] < nodes[-1]
    assert rows[0]["change"] == "nan"
    assert rep["convergence"][0]["change"] is None


def test_compute_energy_matches_library_bit_for_bit(tmp_path):
    code, rep = run(tmp_path, "compute", "--set", "quantity=M", "--set", "family=radial",
                    "--set", "coefficients=0,0.1,-0.05", "--set", "n_t=8")
    assert code == 0
    cfg = RunConfig(family="radial", coefficients=(0.0, 0.1, -0.05), n_t=8)
    expect = functionals.k_energy_path(1, linear_path(build_potential(cfg), 8), cfg.grid()).value
    assert rep["value"] == expect


def test_compute_futaki_for_fubini_study(tmp_path):
    code, rep = run(tmp_path, "compute", "--set", "quantity=F", "--set", "family=fs")
    assert code == 0
    value = rep["value"]
    mag = math.hypot(value["re"], value["im"]) if isinstance(value, dict) else abs(value)
    assert mag <= 1e-8


def test_compute_lambda_on_cp2(tmp_path):
    code, rep = run(tmp_path, "compute", "--manifold", "CP2", "--set", "symmetry=radial",
                    "--set", "quantity=lambda")
    assert code == 0 and rep["value"] == pytest.approx(3.0, abs=1e-8)


def test_descend_writes_a_monotone_trajectory(tmp_path):
    traj = tmp_path / "traj.csv"
    code, rep = run(tmp_path, "descend", "--set", f"trajectory={traj}", "--set", "steps=200")
    assert code == 0
    with traj.open() as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == TRAJECTORY_COLUMNS
    energies = [float(r["M_k"]) for r in rows]
    assert all(b <= a for a, b in zip(energies, energies[1:]))
    assert float(rows[-1]["residual"]) <= 1e-4
    assert rep["descent"]["converged"]


def test_descend_from_fubini_study_is_trivial(tmp_path):
    code, rep = run(tmp_path, "descend", "--set", "epsilon=0")
    assert code == 0
    with open(rep["trajectory_csv"]) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1 and rows[0]["step"] == "0"


def test_descend_from_infeasible_start(tmp_path, capsys):
    code, _ = run(tmp_path, "descend", "--set", "epsilon=1.5")
    assert code == 2
    assert "not admissible" in capsys.readouterr().err


def test_threads_flag(tmp_path):
    code, rep = run(tmp_path, "verify", "--suite", "reference", "--threads", "2")
    assert code == 0 and rep["config"]["threads"] == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "kenergy", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "kenergy" in res.stdout


def test_compute_of_a_vanishing_quantity_passes_its_convergence_check(tmp_path):
    # F is zero on CP^1 for every metric: convergence is judged in absolute terms
    code, rep = run(tmp_path, "compute", "--set", "quantity=F", "--set", "family=radial",
                    "--set", "coefficients=0,0,0.2")
    assert code == 0
    assert rep["records"][0]["mode"] == "abs"
