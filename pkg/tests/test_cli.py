import csv
import json

import pytest

from esgd.cheb import make_profile
from esgd.cli import main, parse_problem_spec, UsageError


def read_csv(path):
    lines = path.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    rows = list(csv.DictReader(ln for ln in lines if not ln.startswith("#")))
    return meta, rows


def test_parse_problem_spec():
    assert parse_problem_spec("wishart:n=480,m=500") == ("wishart", {"n": 480, "m": 500})
    assert parse_problem_spec("tv:lam=0.06,image=a.pgm") == ("tv", {"lam": 0.06, "image": "a.pgm"})
    assert parse_problem_spec("pde") == ("pde", {})
    with pytest.raises(UsageError):
        parse_problem_spec("pde:d")


def test_solve_wishart_esgd(tmp_path, capsys):
    out = tmp_path / "t.csv"
    status = main(["solve", "--problem", "wishart:n=480,m=500", "--solver", "esgd", "--eta", "1.17",
                   "--max-grad-evals", "20000", "--seed", "7", "--out", str(out)])
    assert status == 0
    meta, rows = read_csv(out)
    assert "# seed=7" in meta
    assert list(rows[0]) == ["outer_iter", "grad_evals", "f_gap", "grad_norm", "elapsed_s"]
    evals = [int(r["grad_evals"]) for r in rows]
    assert all(b > a for a, b in zip(evals, evals[1:]))
    assert "grad_evals=" in capsys.readouterr().out


def test_solve_cg_reaches_relative_gap(tmp_path):
    out = tmp_path / "cg.csv"
    assert main(["solve", "--problem", "wishart:n=480,m=500", "--solver", "cg", "--seed", "7",
                 "--rel-gap-tol", "1e-9", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    gaps = [float(r["f_gap"]) for r in rows]
    assert gaps[-1] <= 1e-9 * gaps[0]


def test_solve_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"r{k}.csv"
        main(["solve", "--problem", "logistic:m=60,d=8", "--solver", "agd", "--seed", "3",
              "--max-grad-evals", "50", "--out", str(out)])
        _, rows = read_csv(out)
        outs.append([(r["grad_evals"], r["f_gap"]) for r in rows])
    assert outs[0] == outs[1]


def test_solve_incompatible(capsys):
    assert main(["solve", "--solver", "pesgd", "--problem", "logistic:m=20,d=3"]) == 2
    assert main(["solve", "--solver", "cg", "--problem", "pde:d=10"]) == 2
    assert main(["solve", "--solver", "gd", "--problem", "nothing"]) == 2
    assert main(["solve", "--solver", "gd", "--problem", "pde:q=1"]) == 2
    assert main(["solve", "--solver", "magic", "--problem", "pde"]) == 2


def test_solve_pesgd_and_divergence(tmp_path, capsys):
    assert main(["solve", "--solver", "pesgd", "--problem", "pde:d=30", "--rel-gap-tol", "1e-6",
                 "--out", str(tmp_path / "p.csv")]) == 0
    assert "g_evals=" in capsys.readouterr().out


def test_solve_divergence_status(monkeypatch, capsys):
    from esgd import cli
    from esgd.errors import DivergenceError

    def boom(*a, **k):
        raise DivergenceError("blew up", stage=3, iteration=2)

    monkeypatch.setitem(cli.SOLVERS, "gd", boom)
    assert main(["solve", "--solver", "gd", "--problem", "pde:d=5"]) == 3
    assert "internal stage 3" in capsys.readouterr().err


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 11, "max-grad-evals": 30}))
    out = tmp_path / "o.csv"
    assert main(["solve", "--config", str(cfg), "--problem", "pde:d=10", "--solver", "gd",
                 "--out", str(out)]) == 0
    meta, rows = read_csv(out)
    assert "# seed=11" in meta and int(rows[-1]["grad_evals"]) == 30
    assert main(["solve", "--config", str(cfg), "--seed", "2", "--max-grad-evals", "5",
                 "--problem", "pde:d=10", "--solver", "gd", "--out", str(out)]) == 0
    meta, rows = read_csv(out)
    assert "# seed=2" in meta and int(rows[-1]["grad_evals"]) == 5


def test_stability_command(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["stability", "--s", "10", "--eta", "0", "--window=-210,-190,-1,1",
                 "--resolution", "21,1", "--out", str(out)]) == 0
    meta, rows = read_csv(out)
    hit = [r for r in rows if float(r["re"]) == -200 and float(r["im"]) == 0]
    assert hit and abs(float(hit[0]["abs_r"]) - 1) <= 1e-9

    assert main(["stability", "--s", "10", "--eta", "2", "--window=-96.86,-0.9591,-0.5,0.5",
                 "--resolution", "300,1", "--out", str(out)]) == 0
    meta, rows = read_csv(out)
    assert max(float(r["abs_r"]) for r in rows) <= 0.26666
    alpha = float(next(m for m in meta if m.startswith("# alpha=")).split("=")[1])
    assert alpha == pytest.approx(make_profile(10, 2.0).alpha, rel=1e-12)
    assert any(m.startswith("# seed=") for m in meta)


def test_stability_oversized(tmp_path):
    assert main(["stability", "--s", "3", "--resolution", "5000,2", "--out",
                 str(tmp_path / "x.csv")]) == 2


def test_rates_command(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["rates", "--kappa", "1,101", "--eta", "2", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert float(rows[0]["c_opt"]) == 0.0
    assert float(rows[1]["gap"]) == pytest.approx(0.09694, abs=1e-5)
    assert main(["rates", "--eta", "10", "--out", str(out)]) == 0
    meta, rows = read_csv(out)
    slope = float(next(m for m in meta if m.startswith("# slope[eta=10]")).split("=")[2].split()[0])
    assert -0.55 <= slope <= -0.45
    assert len(rows) == 25


def test_verify_command(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert " s=1 " in out
    assert main(["verify", "--inject-fault"]) != 0


def test_bench_pde_only(tmp_path, capsys):
    assert main(["bench", "--only", "pde", "--out-dir", str(tmp_path)]) == 0
    meta, rows = read_csv(tmp_path / "summary.csv")
    pesgd = [r for r in rows if r["solver"].startswith("pesgd")]
    assert all(int(r["g_evals"]) == int(r["outer_iters"]) for r in pesgd)
    assert "# seed=0" in meta
    assert main(["bench", "--only", "nothing", "--out-dir", str(tmp_path)]) == 2
