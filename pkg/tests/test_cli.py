import json
import subprocess
import sys

import numpy as np
import pytest

from rdsplit import cli, harness
from rdsplit.compositions import StepError, build_order, load_scheme, save_scheme


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_table1_csv(capsys, tmp_path):
    path = tmp_path / "t1.csv"
    code, out, _ = run(capsys, "table1", "--D", "10", "--D", "0.01", "--out", str(path))
    assert code == 0
    terms = harness.read_terms_csv(path)
    assert sorted(terms) == [0.01, 10.0]
    assert len(terms[10.0]) == 6
    assert terms[10.0]["D f [f u]_xx"] == pytest.approx(1.15e4, rel=0.01)
    assert "D^2 [f u_xx]_xx" in out


def test_scheme_print(capsys):
    code, out, _ = run(capsys, "scheme", "--order", "4", "--print")
    assert code == 0
    rows = [l.split() for l in out.splitlines() if l and not l.startswith(("#", "order"))]
    a = sum(complex(float(r[0]), float(r[1])) for r in rows)
    b = sum(complex(float(r[2]), float(r[3])) for r in rows)
    assert abs(a - 1) < 1e-15 and abs(b - 1) < 1e-15
    assert any(len(r[0].split(".")[1]) >= 15 for r in rows)


def test_scheme_save_and_validate(capsys, tmp_path):
    path = tmp_path / "s8.txt"
    assert run(capsys, "scheme", "--order", "8", "--save", str(path))[0] == 0
    assert load_scheme(path).stages == build_order(8).stages
    bad = tmp_path / "bad.txt"
    bad.write_text("order 1 name bad\n0.9 0 1 0\n")
    with pytest.warns(UserWarning):
        code, _, err = run(capsys, "scheme", "--file", str(bad))
    assert code == 2
    assert err.strip().splitlines()[-1].startswith("error: config: ")


def test_converge_rows_and_round_trip(capsys, tmp_path):
    path = tmp_path / "c.csv"
    code, out, _ = run(capsys, "converge", "--preset", "linpot-low", "--orders", "2,4,6,8",
                       "--dt-grid", "0.5,0.25,0.125", "--out", str(path))
    assert code == 0
    table = harness.read_study_csv(path)
    assert len(table.records) == 4 * 3
    assert "tj8" in out


def test_converge_deterministic(capsys, tmp_path):
    rows = []
    for name in ("a.csv", "b.csv"):
        run(capsys, "converge", "--preset", "linpot-high", "--orders", "4",
            "--dt-grid", "0.25,0.125", "--out", str(tmp_path / name))
        rows.append([line.rsplit(",", 2)[0] for line in (tmp_path / name).read_text().splitlines()])
    assert rows[0] == rows[1]


def test_efficiency_serial(capsys, tmp_path):
    path = tmp_path / "e.csv"
    code, _, _ = run(capsys, "efficiency", "--preset", "linpot-low", "--orders", "2",
                     "--dt-grid", "0.5,0.25", "--repeats", "2", "--out", str(path))
    assert code == 0
    assert all(r.wall_seconds > 0 for r in harness.read_study_csv(path).records)


def test_scheme_file_in_study(capsys, tmp_path):
    scheme = tmp_path / "s.txt"
    save_scheme(build_order(4), scheme)
    path = tmp_path / "c.csv"
    run(capsys, "converge", "--preset", "linpot-low", "--scheme-file", str(scheme),
        "--dt-grid", "0.5,0.25", "--out", str(path))
    assert {r.scheme for r in harness.read_study_csv(path).records} == {"tj4"}


def test_simulate_writes_species(capsys, tmp_path):
    out = tmp_path / "sim.csv"
    code, stdout, _ = run(capsys, "simulate", "--preset", "gs-chaos", "--t-final", "2.5",
                          "--stride", "2", "--out", str(out))
    assert code == 0
    t, x, u = harness.read_snapshot_csv(tmp_path / "sim_u.csv")
    _, _, v = harness.read_snapshot_csv(tmp_path / "sim_v.csv")
    np.testing.assert_allclose(t, [0, 0.5, 1.0, 1.5, 2.0, 2.5])
    assert u.shape == v.shape == (6, 256) and x.size == 256


def test_simulate_needs_t_final(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--preset", "gs-chaos", "--out", str(tmp_path / "x"))
    assert code == 2 and "--t-final" in err.splitlines()[-1]


@pytest.mark.parametrize("argv", [
    ["converge", "--preset", "nope", "--out", "x.csv"],
    ["converge", "--preset", "gs-low", "--dt-grid", "3", "--out", "x.csv"],
    ["converge", "--preset", "gs-low"],
    ["table1", "--n", "1000"],
    ["scheme"],
])
def test_config_errors(capsys, tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert err.strip().splitlines()[-1].startswith("error: config: ")
    assert not list(tmp_path.glob("*.csv"))


def test_numerical_error_exit_code(capsys, tmp_path, monkeypatch):
    def explode(*args, **kwargs):
        raise StepError("step 3: non-finite state", step_index=3)

    monkeypatch.setattr(cli, "integrate", explode)
    code, _, err = run(capsys, "simulate", "--preset", "gs-chaos", "--t-final", "1",
                       "--out", str(tmp_path / "s"))
    assert code == 3
    assert err.strip().splitlines()[-1] == "error: numerical: step 3: non-finite state"
    assert not list(tmp_path.iterdir())


def test_config_file_precedence(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"preset": "linpot-low", "orders": [2], "dt_grid": [0.5, 0.25],
                               "out": str(tmp_path / "from_cfg.csv")}))
    assert run(capsys, "converge", "--config", str(cfg))[0] == 0
    assert len(harness.read_study_csv(tmp_path / "from_cfg.csv").records) == 2
    flag_out = tmp_path / "from_flag.csv"
    run(capsys, "converge", "--config", str(cfg), "--orders", "2,4", "--out", str(flag_out))
    assert len(harness.read_study_csv(flag_out).records) == 4
    cfg.write_text(json.dumps({"bogus": 1}))
    code, _, err = run(capsys, "converge", "--config", str(cfg))
    assert code == 2 and "bogus" in err


def test_unknown_flag_usage():
    proc = subprocess.run([sys.executable, "-m", "rdsplit.cli", "converge", "--bogus"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "usage:" in proc.stderr


def test_console_script_help():
    proc = subprocess.run([sys.executable, "-m", "rdsplit.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("converge", "efficiency", "simulate", "table1", "scheme"):
        assert cmd in proc.stdout
