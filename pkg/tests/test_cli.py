from __future__ import annotations

import subprocess
import sys

import numpy as np
import pytest

from oracles import mp_gram_stieltjes
from rmtshrink import cli
from rmtshrink.errors import NonConvergence
from rmtshrink.io import read_blob, read_shrinkage_csv, write_blob, write_csv
from rmtshrink.shrinkage import SampleDecomposition


@pytest.fixture
def identity_csv(tmp_path):
    p = tmp_path / "identity.csv"
    p.write_text("1.0,100\n")
    return p


@pytest.fixture
def three_level_csv(tmp_path):
    p = tmp_path / "three_level.csv"
    p.write_text("value,weight\n1,0.2\n3,0.4\n10,0.4\n")
    return p


def read_rows(text):
    lines = text.strip().splitlines()
    return lines[0].split(","), [[float(v) for v in ln.split(",")] for ln in lines[1:]]


def test_help_and_bad_usage(capsys):
    assert cli.main(["--help"]) == 0
    assert cli.main(["no-such-command"]) == 1
    assert cli.main(["solve-mp"]) == 1


def test_solve_mp_single_point(identity_csv, capsys):
    assert cli.main(["solve-mp", str(identity_csv), "--n", "200", "--z", "2+0.1j"]) == 0
    header, rows = read_rows(capsys.readouterr().out)
    assert header == ["z_re", "z_im", "m_frak_re", "m_frak_im", "m_re", "m_im", "density"]
    mf = complex(rows[0][2], rows[0][3])
    assert abs(mf - mp_gram_stieltjes(2 + 0.1j, 0.5)) < 1e-10
    m = complex(rows[0][4], rows[0][5])
    assert abs(m - np.sqrt(2 + 0.1j) * mf) < 1e-12


def test_solve_mp_grid_density_mass(three_level_csv, tmp_path):
    out = tmp_path / "grid.csv"
    code = cli.main(["solve-mp", str(three_level_csv), "--n", "2000", "--dimension", "1000", "--grid", "0.01:30:2000", "--out", str(out)])
    assert code == 0
    _, rows = read_rows(out.read_text())
    x = np.array([r[0] for r in rows])
    dens = np.array([r[6] for r in rows])
    # the Gram law carries mass M/N on the positive axis
    assert abs(np.trapezoid(dens, x) - 0.5) < 1e-3


def test_solve_mp_input_errors(identity_csv, tmp_path, capsys):
    assert cli.main(["solve-mp", str(identity_csv), "--n", "200"]) == 1
    assert cli.main(["solve-mp", str(identity_csv), "--n", "200", "--z", "nonsense"]) == 1
    assert cli.main(["solve-mp", str(identity_csv), "--n", "200", "--z", "-1"]) == 1
    assert cli.main(["solve-mp", str(identity_csv), "--n", "200", "--grid", "1:2"]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\n2.0\nx\n")
    assert cli.main(["solve-mp", str(bad), "--n", "200", "--z", "1+1j"]) == 1
    assert "line 3" in capsys.readouterr().err


def test_solve_mp_numerical_failure_exit_2(identity_csv, monkeypatch, capsys):
    def boom(sp, z):
        raise NonConvergence("no luck", 1.0, "max_iter")

    monkeypatch.setattr(cli, "solve_stieltjes_array", boom)
    assert cli.main(["solve-mp", str(identity_csv), "--n", "200", "--z", "3+0.5j"]) == 2
    assert "(3+0.5j)" in capsys.readouterr().err


def test_support(three_level_csv, tmp_path, capsys):
    assert cli.main(["support", str(three_level_csv), "--n", "400", "--dimension", "200"]) == 0
    assert capsys.readouterr().out.startswith("bulk_index,upper_edge")
    out = tmp_path / "support"
    assert cli.main(["support", str(three_level_csv), "--n", "400", "--dimension", "200", "--out", str(out)]) == 0
    assert (out / "edges.csv").exists()
    assert len((out / "classical_locations.csv").read_text().splitlines()) == 201


def test_estimate_round_trip(tmp_path):
    y = np.random.default_rng(0).standard_normal((20, 80)) * np.linspace(1, 3, 20)[:, None]
    data = tmp_path / "y.csv"
    write_csv(data, [f"c{j}" for j in range(80)], y.tolist())
    for loss in ("f", "finv"):
        out = tmp_path / loss
        assert cli.main(["estimate", str(data), "--loss", loss, "--out", str(out)]) == 0
        lam, shrunk = read_shrinkage_csv(out / "shrinkage.csv")
        est = read_blob(out / "estimator.shrk")
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(est))[::-1], np.sort(shrunk)[::-1], atol=1e-10)
        np.testing.assert_array_equal(lam, SampleDecomposition.from_eigh(y).sample_eigenvalues)
    # the blob input path gives the same bytes
    write_blob(tmp_path / "y.shrk", y)
    assert cli.main(["estimate", str(tmp_path / "y.shrk"), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "estimator.shrk").read_bytes() == (tmp_path / "f" / "estimator.shrk").read_bytes()


def test_estimate_rejects(tmp_path, capsys):
    write_blob(tmp_path / "sq.shrk", np.eye(5))
    assert cli.main(["estimate", str(tmp_path / "sq.shrk"), "--out", str(tmp_path / "o")]) == 1
    assert "M < N" in capsys.readouterr().err
    write_blob(tmp_path / "y.shrk", np.ones((2, 10)))
    assert cli.main(["estimate", str(tmp_path / "y.shrk"), "--eta", "bad", "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["estimate", str(tmp_path / "y.shrk"), "--eta", "1.5", "--out", str(tmp_path / "o")]) == 1
    assert cli.main(["estimate", str(tmp_path / "missing"), "--out", str(tmp_path / "o")]) == 1


def test_predict_overlap(three_level_csv, tmp_path, capsys):
    args = ["predict-overlap", str(three_level_csv), "--n", "200", "--dimension", "100"]
    assert cli.main([*args, "--observable", "identity"]) == 0
    header, rows = read_rows(capsys.readouterr().out)
    assert header == ["k", "i", "gamma", "predicted"]
    np.testing.assert_allclose([r[3] for r in rows], 1.0, atol=1e-8)
    diag = tmp_path / "d.csv"
    diag.write_text("\n".join(["1.0"] * 100) + "\n")
    assert cli.main([*args, "--diagonal", str(diag)]) == 0
    _, rows2 = read_rows(capsys.readouterr().out)
    np.testing.assert_allclose([r[3] for r in rows2], [r[3] for r in rows], atol=1e-14)


def test_verify_kernels_exit_codes(tmp_path, capsys):
    assert cli.main(["verify-kernels", "--n", "20", "--trials", "10"]) == 0
    header, _ = capsys.readouterr().out.splitlines()[0], None
    assert header == "identity,max_residual,threshold,status"
    assert cli.main(["verify-kernels", "--n", "20", "--trials", "10", "--inject-t-fault"]) == 3
    out = capsys.readouterr().out
    assert ",fail" in out
    assert cli.main(["verify-kernels", "--n", "20", "--trials", "10", "--multiplier", "0.001"]) == 3


def small_config(tmp_path, extra=""):
    p = tmp_path / "cfg.json"
    p.write_text(
        '{"spectrum": [[1, 0.2], [3, 0.4], [10, 0.4]], "c": 0.5, "n_grid": [60],'
        f' "replications": 2, "scatter": false{extra}}}'
    )
    return p


def test_simulate_writes_out_dir(tmp_path):
    cfg = small_config(tmp_path)
    out = tmp_path / "a" / "b"
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    assert (out / "report.csv").exists() and (out / "summary.json").exists()
    first = (out / "report.csv").read_bytes()
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
    assert (out / "report.csv").read_bytes() == first
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "4"]) == 0
    assert (tmp_path / "c" / "report.csv").read_bytes() != first


def test_simulate_config_beats_flags(tmp_path):
    cfg = small_config(tmp_path, f', "seed": 3, "out_dir": "{tmp_path / "from_cfg"}"')
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "from_flag"), "--seed", "9"]) == 0
    assert (tmp_path / "from_cfg" / "report.csv").exists()
    assert not (tmp_path / "from_flag").exists()
    assert '"seed": 3' in (tmp_path / "from_cfg" / "summary.json").read_text()


def test_simulate_input_errors(tmp_path):
    cfg = small_config(tmp_path)
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(blocker / "sub")]) == 1
    assert cli.main(["simulate", "--config", str(cfg)]) == 1
    assert cli.main(["simulate", "--config", "no-such-config"]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"c": 0.5,\n "bogus": 1}')
    assert cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 1


def test_bundled_configs_parse():
    for name in ("fig1", "rate", "overlap"):
        assert cli._bundled_or_path(name).exists()


def test_console_script_runs(identity_csv):
    res = subprocess.run(
        [sys.executable, "-m", "rmtshrink.cli", "solve-mp", str(identity_csv), "--n", "200", "--z", "1+1j"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert res.stdout.startswith("z_re,")
