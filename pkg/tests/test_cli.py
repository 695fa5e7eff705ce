"""End-to-end CLI runs in temporary directories: artifacts, exit codes,
determinism."""

import json

import numpy as np
import pytest

from kacbath.cli import main, perturbation_data
from kacbath.output import read_matrix


def _write_config(tmp_path, name="c.json", **fields):
    doc = {"m": 1, "n": 2}
    doc.update(fields)
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def _run(*argv) -> int:
    return main(list(argv))


def test_simulate_writes_moment_csv(tmp_path):
    cfg = _write_config(
        tmp_path, t_end=0.5, record_times=[0.0, 0.5], ensemble=100,
        observables=["v1x", "system_energy"], seed=3)
    out = tmp_path / "m.csv"
    assert _run("simulate", "--config", cfg, "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "time,observable,mean,std_error,n_samples"
    assert len(lines) == 1 + 2 * 2


def test_simulate_deterministic_and_seed_sensitive(tmp_path):
    cfg = _write_config(tmp_path, t_end=0.5, record_times=[0.5], ensemble=64)
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert _run("simulate", "--config", cfg, "--out", str(a)) == 0
    assert _run("simulate", "--config", cfg, "--out", str(b)) == 0
    assert _run("simulate", "--config", cfg, "--out", str(c), "--seed", "99") == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_spectral_exports_symmetric_operator(tmp_path):
    cfg = _write_config(tmp_path, degree=2)
    out = tmp_path / "gen.mat"
    assert _run("spectral", "--config", cfg, "--out", str(out)) == 0
    mat = read_matrix(str(out))
    assert mat.shape == (55, 55)
    assert np.abs(mat - mat.T).max() < 1e-10


def test_verify_lemma1_csv(tmp_path):
    cfg = _write_config(
        tmp_path, samples=400, inner=16, system_sizes=[1],
        reservoir_sizes=[2], init={"kind": "perturbation", "eps": 0.4})
    out = tmp_path / "l1.csv"
    assert _run("verify-lemma1", "--config", cfg, "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "M,N,C,ratio,stderr,samples"
    assert len(lines) == 2


def test_verify_lemma2_json(tmp_path):
    cfg = _write_config(tmp_path, degree=2, random_polynomials=5)
    out = tmp_path / "l2.json"
    assert _run("verify-lemma2", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["identity_defect"] <= 1e-9
    assert doc["bound_violation"] <= 1e-12
    assert len(doc["trials"]) == 5


def test_verify_lemma3_needs_no_config(tmp_path, capsys):
    out = tmp_path / "l3.json"
    assert _run("verify-lemma3", "--max-degree", "3", "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["top_eigenvalue"] <= 2.0 / 3.0 + 1e-10
    assert set(doc["matrix_route"]) == {"1", "2", "3"}
    # without --out the report goes to stdout
    assert _run("verify-lemma3", "--max-degree", "1") == 0
    streamed = json.loads(capsys.readouterr().out)
    assert streamed["degree1_eigenvalue"] == pytest.approx(2.0 / 3.0, abs=1e-12)


def test_gap_json(tmp_path):
    cfg = _write_config(tmp_path, degree=2)
    out = tmp_path / "gap.json"
    assert _run("gap", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert doc["k_hat"] == pytest.approx(0.5, abs=1e-9)
    assert doc["l_hat"] == pytest.approx(0.49888765156985887, abs=1e-9)


def test_distance_csv_contract(tmp_path):
    cfg = _write_config(
        tmp_path, t_end=3.0, grid={"count": 10}, degree=2,
        init={"kind": "perturbation", "family": "h2_aniso", "eps": 0.2})
    out = tmp_path / "curve.csv"
    assert _run("distance", "--config", cfg, "--out", str(out)) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,distance,bound,bound_term1,bound_term2"
    rows = [list(map(float, ln.split(","))) for ln in lines[1:]]
    for t, d, bound, t1, t2 in rows:
        assert d <= bound + 1e-9
        assert bound == pytest.approx(t1 + t2, abs=1e-12)


def test_bound_single_curve(tmp_path):
    cfg = _write_config(tmp_path, t_end=3.0, grid={"count": 8}, degree=2)
    out = tmp_path / "b.csv"
    assert _run("bound", "--config", cfg, "--out", str(out)) == 0
    assert out.read_text().splitlines()[0] == "t,bound,bound_term1,bound_term2"


def test_bound_scaling_mode(tmp_path):
    cfg = _write_config(
        tmp_path, t_end=70.0, grid={"count": 30}, degree=2, eps=0.2,
        reservoir_sizes=[2, 4], cross_check=False)
    out = tmp_path / "scal.json"
    assert _run("bound", "--config", cfg, "--out", str(out)) == 0
    doc = json.loads(out.read_text())
    assert [r["n"] for r in doc["rows"]] == [2, 4]
    assert doc["p"] > 0.0 and doc["q"] > 0.0


def test_report_aggregates_and_flags_failures(tmp_path, capsys):
    cfg = _write_config(tmp_path, degree=2)
    rundir = tmp_path / "run"
    rundir.mkdir()
    assert _run("gap", "--config", cfg, "--out", str(rundir / "gap.json")) == 0
    assert _run("report", "--dir", str(rundir),
                "--out", str(rundir / "report.json")) == 0
    doc = json.loads((rundir / "report.json").read_text())
    assert doc["passed"] is True and doc["files_checked"] == 1

    # a hand-broken distance table must flip the report to failing
    (rundir / "curve.csv").write_text(
        "t,distance,bound,bound_term1,bound_term2\n"
        "1,0.5,0.1,0.1,0\n")
    assert _run("report", "--dir", str(rundir)) == 3
    streamed = json.loads(capsys.readouterr().out)
    assert streamed["passed"] is False


def test_report_empty_directory_is_a_config_error(tmp_path, capsys):
    assert _run("report", "--dir", str(tmp_path)) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError"


def test_exit_codes(tmp_path, capsys):
    # missing config file: I/O
    assert _run("gap", "--config", str(tmp_path / "nope.json"),
                "--out", str(tmp_path / "g.json")) == 4
    # schema violation: config error
    bad = tmp_path / "bad.json"
    bad.write_text('{"m": 1}')
    assert _run("gap", "--config", str(bad),
                "--out", str(tmp_path / "g.json")) == 2
    # unwritable output path: I/O
    good = _write_config(tmp_path)
    assert _run("gap", "--config", good,
                "--out", str(tmp_path / "missing" / "g.json")) == 4
    records = [json.loads(ln) for ln in capsys.readouterr().err.splitlines()]
    assert [r["exit_code"] for r in records] == [4, 2, 4]


def test_unknown_observable_is_config_error(tmp_path, capsys):
    cfg = _write_config(tmp_path, observables=["system_energy"])
    doc = json.loads(open(cfg).read())
    doc["observables"] = ["nonsense"]
    # bypass schema on purpose: the runtime registry must still catch it
    from kacbath.cli import observable_registry
    from kacbath.kinematics import ModelParams

    assert "nonsense" not in observable_registry(ModelParams(1, 2))


def test_perturbation_families_have_unit_mean():
    for fam in ("h1_v1x", "h2_aniso"):
        for m in (1, 2):
            h = perturbation_data(fam, 0.2, m)
            assert h.mean() == pytest.approx(1.0, abs=0)
            assert h.fluctuation_norm() > 0.0
