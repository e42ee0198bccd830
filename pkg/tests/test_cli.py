import json
import math

import numpy as np
import pytest

from fade import __version__
from fade.cli import RunConfig, main, read_config_file


def _csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith(f"# fade {__version__} ")
    header = lines[1].split(",")
    rows = [l.split(",") for l in lines[2:]]
    return header, rows


def test_run_ex61(tmp_path):
    rc = main(["run", "--problem", "ex61", "--alpha", "0.5", "--m", "8", "--tau", "1e-5",
               "--t-end", "0.1", "--weights", "gl1", "--out", str(tmp_path)])
    assert rc == 0
    errs = json.loads((tmp_path / "errors.json").read_text())
    assert errs["e2"] == pytest.approx(1.2489e-3, rel=1e-3)
    assert {"e2", "einf", "eN", "runtime_seconds", "config", "provenance"} <= set(errs)
    header, rows = _csv(tmp_path / "solution.csv")
    assert header == ["t", "x", "u"] and len(rows) == 9
    assert float(rows[-1][1]) == 1.0 and float(rows[0][0]) == pytest.approx(0.1)


def test_run_ex63(tmp_path):
    assert main(["run", "--problem", "ex63", "--alpha", "0.3", "--m", "16", "--tau", "5e-3",
                 "--t-end", "1", "--weights", "ho3", "--out", str(tmp_path)]) == 0
    assert json.loads((tmp_path / "errors.json").read_text())["e2"] == pytest.approx(1.1924e-3, rel=1e-3)


def test_run_ex67(tmp_path):
    assert main(["run", "--problem", "ex67", "--beta1", "1.1", "--beta2", "1.3", "--mx", "10", "--my", "10",
                 "--tau", "2.5e-4", "--t-end", "0.2", "--out", str(tmp_path)]) == 0
    e2 = json.loads((tmp_path / "errors.json").read_text())["e2"]
    assert e2 == pytest.approx(5.4217e-5, rel=0.15)
    header, rows = _csv(tmp_path / "solution.csv")
    assert header == ["t", "x", "y", "u"] and len(rows) == 121


def test_run_every_and_nls_columns(tmp_path):
    assert main(["run", "--problem", "ex65", "--m", "40", "--tau", "2e-3", "--t-end", "0.01",
                 "--scheme", "rk-gill", "--every", "2", "--out", str(tmp_path)]) == 0
    header, rows = _csv(tmp_path / "solution.csv")
    assert header == ["t", "x", "u", "v"]
    assert sorted({round(float(r[0]), 9) for r in rows}) == [0.0, 0.004, 0.008, 0.01]
    errs = json.loads((tmp_path / "errors.json").read_text())
    assert "real" in errs and "imag" in errs


def test_run_deterministic_bytes(tmp_path):
    args = ["run", "--problem", "ex63", "--alpha", "0.3", "--m", "8", "--tau", "0.05", "--t-end", "0.5"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "solution.csv").read_bytes() == (tmp_path / "b" / "solution.csv").read_bytes()
    # fixed 17-significant-digit formatting
    _, rows = _csv(tmp_path / "a" / "solution.csv")
    assert all(v == "%.17g" % float(v) for v in rows[3])


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text("# comment\nproblem = \"ex63\"\nalpha = 0.3\nm = 8\ntau = 0.05\nt-end = 0.5\nweights = 'ho3'\n")
    assert read_config_file(cfg)["t_end"] == "0.5"
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--m", "16", "--out", str(tmp_path / "b")]) == 0
    _, ra = _csv(tmp_path / "a" / "solution.csv")
    _, rb = _csv(tmp_path / "b" / "solution.csv")
    assert len(ra) == 9 and len(rb) == 17


def test_config_hash_stable():
    a = RunConfig(problem="ex61", alpha=0.5, m=8)
    b = RunConfig(problem="ex61", alpha=0.5, m=8)
    assert a.hash() == b.hash() and len(a.hash()) == 12
    assert a.hash() != RunConfig(problem="ex61", alpha=0.5, m=16).hash()


@pytest.mark.parametrize("argv", [
    ["run", "--problem", "ex61", "--m", "8", "--tau", "0.03", "--t-end", "0.1"],   # tau does not divide T
    ["run", "--problem", "ex61", "--m", "8", "--scheme", "rk-gill", "--tau", "1e-3", "--t-end", "0.01"],
    ["run", "--problem", "ex99"],
    ["run"],
    ["converge", "--problem", "ex61", "--tau", "1e-3", "--t-end", "0.01"],
    ["stability", "--sweep", "eps"],
    ["weights", "--order", "1"],
    ["weights", "--m", "4", "--order", "2.5"],
    ["bogus"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)] if argv and argv[0] != "bogus" else argv) == 2


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text("problem = ex61\ncolour = blue\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text("problem = ex61\nthis line is bad\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_numerical_failure_exit_3(tmp_path):
    # E_0.1(3) lies far outside the series range
    assert main(["run", "--problem", "ex61", "--alpha", "0.1", "--m", "4", "--tau", "59049",
                 "--t-end", "59049", "--out", str(tmp_path)]) == 3


def test_converge_table(tmp_path):
    assert main(["converge", "--problem", "ex63", "--alpha", "0.3", "--grids", "8,16,32", "--tau", "5e-3",
                 "--t-end", "1", "--out", str(tmp_path)]) == 0
    header, rows = _csv(tmp_path / "converge.csv")
    assert header == ["M", "e2", "rate_e2", "einf", "rate_einf"]
    assert [r[0] for r in rows] == ["8", "16", "32"]
    assert rows[0][2] == "" and float(rows[2][2]) > 1.5


def test_converge_single_grid(tmp_path):
    assert main(["converge", "--problem", "ex63", "--grids", "8", "--tau", "0.05", "--t-end", "0.5",
                 "--out", str(tmp_path)]) == 0
    _, rows = _csv(tmp_path / "converge.csv")
    assert len(rows) == 1 and rows[0][2] == "" and rows[0][4] == ""


def test_converge_threads_same_output(tmp_path, monkeypatch):
    args = ["converge", "--problem", "ex63", "--grids", "8,16", "--tau", "0.05", "--t-end", "0.5"]
    main(args + ["--out", str(tmp_path / "a")])
    monkeypatch.setenv("FADE_THREADS", "2")
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "converge.csv").read_bytes() == (tmp_path / "b" / "converge.csv").read_bytes()
    monkeypatch.setenv("FADE_THREADS", "many")
    assert main(args + ["--out", str(tmp_path / "c")]) == 2


def test_stability_sweep(tmp_path):
    assert main(["stability", "--sweep", "eps", "--values", "1,10,100", "--kappa", "10", "--spectrum",
                 "--out", str(tmp_path)]) == 0
    header, rows = _csv(tmp_path / "sweep.csv")
    assert header == ["param", "value", "resolvent_norm"]
    norms = [float(r[2]) for r in rows]
    assert [r[0] for r in rows] == ["eps"] * 3 and norms[0] > norms[1] > norms[2]
    h2, spec = _csv(tmp_path / "spectrum.csv")
    assert h2 == ["re", "im"] and len(spec) == 48


def test_stability_m_sweep(tmp_path):
    assert main(["stability", "--sweep", "M", "--values", "3,5,8", "--kappa", "500", "--eps", "1",
                 "--out", str(tmp_path)]) == 0
    _, rows = _csv(tmp_path / "sweep.csv")
    norms = [float(r[2]) for r in rows]
    assert norms[0] > norms[1] > norms[2]


def test_stability_critical(tmp_path, capsys):
    assert main(["stability", "--critical", "--tau", "1e-10", "--eps", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert abs(float(out.split("=")[-1]) - 40.0) <= 10.0
    header, rows = _csv(tmp_path / "critical.csv")
    assert header == ["kappa_max", "critical_ratio"] and abs(float(rows[0][1]) - 40.0) <= 10.0


def test_weights_first_order(tmp_path):
    assert main(["weights", "--kind", "ctb", "--order", "1", "--m", "4", "--out", str(tmp_path)]) == 0
    header, rows = _csv(tmp_path / "weights.csv")
    assert header == ["row", "col0", "col1", "col2", "col3", "col4"] and len(rows) == 5
    W = np.array([[float(v) for v in r[1:]] for r in rows])
    assert np.max(np.abs(W.sum(axis=1))) < 1e-9


def test_weights_fractional_beta_two_equals_second_order(tmp_path):
    assert main(["weights", "--kind", "cubicb", "--order", "2", "--method", "direct", "--m", "10",
                 "--out", str(tmp_path / "s2")]) == 0
    assert main(["weights", "--order", "2", "--method", "fractional", "--m", "10",
                 "--out", str(tmp_path / "b2")]) == 0
    _, s2 = _csv(tmp_path / "s2" / "weights.csv")
    _, b2 = _csv(tmp_path / "b2" / "weights.csv")
    S = {r[0]: np.array(r[1:], float) for r in s2}
    assert [r[0] for r in b2] == [str(i) for i in range(1, 10)]
    for r in b2:
        assert np.max(np.abs(np.array(r[1:], float) - S[r[0]])) < 1e-8


def test_weights_second_order_on_quadratic(tmp_path):
    assert main(["weights", "--order", "2", "--m", "16", "--out", str(tmp_path)]) == 0
    _, rows = _csv(tmp_path / "weights.csv")
    W = np.array([[float(v) for v in r[1:]] for r in rows])
    x = np.linspace(0.0, 1.0, 17)
    d2 = W @ x**2
    # about 2 away from the boundary layer of the modified basis
    assert np.max(np.abs(d2[3:-3] - 2.0)) < 1e-4
    assert math.isclose(np.median(d2), 2.0, rel_tol=1e-4)


def test_version(capsys):
    assert main(["--version"]) == 0
    assert __version__ in capsys.readouterr().out
