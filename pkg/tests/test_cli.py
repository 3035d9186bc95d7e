import csv
import io

import numpy as np
import pytest

from fracdiff import cli, experiments
from fracdiff.geometry import generate_mesh, read_mesh
from fracdiff.linalg import NonConvergence
from fracdiff.timestepping import SchemeConfig


def _rows(text):
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(body))))


def _comments(text):
    out = {}
    for ln in text.splitlines():
        if ln.startswith("# ") and " = " in ln:
            k, v = ln[2:].split(" = ", 1)
            out[k] = v
    return out


def test_mesh_command(tmp_path):
    out = tmp_path / "g2.msh"
    assert cli.main(["mesh", "--h", "0.0245", "--out", str(out)]) == 0
    mesh = read_mesh(out)
    assert 520 <= mesh.n_nodes <= 900


def test_mesh_command_rejects_coarse_h(tmp_path, capsys):
    assert cli.main(["mesh", "--h", "0.9", "--out", str(tmp_path / "x.msh")]) == 1
    assert "fracdiff:" in capsys.readouterr().err


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["evolve", "--stepper", "rk4"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["evolve", "--h", "0.1", "--mesh", "a.msh"])
    assert exc.value.code == 1
    assert cli.main(["evolve", "--h", "0.07", "--delta", "-3"]) == 1
    assert cli.main(["evolve", "--h", "0.07", "--ksteps", "5,10"]) == 1
    assert cli.main(["evolve", "--mesh", "/nonexistent.msh"]) == 1


def test_evolve_csv_and_echo(tmp_path):
    out = tmp_path / "ev.csv"
    assert cli.main(["evolve", "--h", "0.07", "--nsteps", "4", "--tau", "0.01", "--monitor-d",
                     "--out", str(out)]) == 0
    text = out.read_text()
    rows = _rows(text)
    assert rows[0] == ["n", "t", "w_max", "M_norm", "D_norm"]
    assert len(rows) == 1 + 5 and all(len(r) == 5 for r in rows)
    echo = _comments(text)
    assert echo["status"] == "stable"
    assert float(echo["delta"]) == pytest.approx(0.99 * float(echo["lambda1"]))
    assert float(echo["beta"]) == pytest.approx(0.5)
    # bit-exact reproducibility
    out2 = tmp_path / "ev2.csv"
    cli.main(["evolve", "--h", "0.07", "--nsteps", "4", "--tau", "0.01", "--monitor-d", "--out", str(out2)])
    assert out2.read_text() == text


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# sweep settings\nh = 0.07\nnsteps = 3\ndelta = 20\nalpha = 0.75\n")
    out = tmp_path / "ev.csv"
    assert cli.main(["evolve", "--config", str(conf), "--nsteps", "2", "--out", str(out)]) == 0
    text = out.read_text()
    echo = _comments(text)
    assert echo["nsteps"] == "2" and echo["delta"] == "20.0" and echo["alpha"] == "0.75"
    assert len(_rows(text)) == 1 + 3
    conf.write_text("h 0.07\n")
    assert cli.main(["evolve", "--config", str(conf)]) == 1


def test_config_file_mesh_path(tmp_path):
    msh = tmp_path / "m.msh"
    cli.main(["mesh", "--h", "0.07", "--out", str(msh)])
    conf = tmp_path / "run.conf"
    conf.write_text(f"mesh = {msh}\nnsteps = 1\n")
    out = tmp_path / "ev.csv"
    assert cli.main(["evolve", "--config", str(conf), "--out", str(out)]) == 0
    assert _comments(out.read_text())["nodes"] == str(read_mesh(msh).n_nodes)


def test_stationary_command(tmp_path):
    out = tmp_path / "st.csv"
    assert cli.main(["stationary", "--h", "0.07", "--gamma", "0", "--ksteps", "5,10,20", "--out", str(out)]) == 0
    rows = _rows(out.read_text())
    assert rows[0] == ["K", "eta", "y_max", "M_norm", "error_vs_finest"]
    assert [int(r[0]) for r in rows[1:]] == [5, 10, 20]
    assert float(rows[-1][4]) == 0.0


def test_sigma_sweep_command(tmp_path):
    out = tmp_path / "sw.csv"
    assert cli.main(["sigma-sweep", "--h", "0.07", "--alpha", "0.95", "--delta", "20",
                     "--sigmas", "0.5,0.0", "--out", str(out)]) == 0
    text = out.read_text()
    rows = _rows(text)
    assert [r[3] for r in rows[1:]] == ["stable", "diverged"]
    assert _comments(text)["sigma_star"] == "0.5"


def test_table1_from_files(tmp_path):
    paths = []
    for i, h in enumerate((0.1, 0.08, 0.07)):
        p = tmp_path / f"g{i}.msh"
        cli.main(["mesh", "--h", str(h), "--out", str(p)])
        paths.append(str(p))
    out = tmp_path / "t1.csv"
    assert cli.main(["table1", "--meshes", *paths, "--mus", "1,10", "--jobs", "2", "--out", str(out)]) == 0
    rows = _rows(out.read_text())
    assert rows[0] == ["grid", "mu", "lambda1", "iterations"]
    assert [(r[0], r[1]) for r in rows[1:]] == [("1", "1.0"), ("1", "10.0"), ("2", "1.0"), ("2", "10.0"),
                                                 ("3", "1.0"), ("3", "10.0")]


def test_verify_command(capsys):
    assert cli.main(["verify"]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and text.count("PASS") >= 10


def test_verify_failure_exit_code(monkeypatch):
    from fracdiff import verify
    monkeypatch.setattr(verify, "run_checks", lambda **kw: [verify.Check("x", False, "forced")])
    assert cli.main(["verify"]) == 3


def test_nonconvergence_exit_code(monkeypatch):
    def boom(*a, **k):
        raise NonConvergence("forced", 1.0, 3)
    monkeypatch.setattr(experiments, "evolve", boom)
    assert cli.main(["evolve", "--h", "0.07"]) == 2


def test_sweep_order_independent_of_jobs(small_sys):
    cfg = SchemeConfig(0.5, 0.01, 5, delta=20.0)
    a, sa, _ = experiments.sigma_sweep(small_sys, cfg, [0.5, 0.1, 0.0], jobs=1)
    b, sb, _ = experiments.sigma_sweep(small_sys, cfg, [0.5, 0.1, 0.0], jobs=3)
    assert sa == sb
    for ra, rb in zip(a, b):
        assert ra[0] == rb[0] and ra[3] == rb[3]
        assert ra[1] == rb[1] or (np.isnan(ra[1]) and np.isnan(rb[1]))
