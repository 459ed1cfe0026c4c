from esgd import bench
from esgd.io import read_pgm


def test_cell_seed():
    assert bench.cell_seed(0, "wishart") == bench.cell_seed(0, "wishart")
    assert bench.cell_seed(0, "wishart") != bench.cell_seed(0, "tv")
    assert bench.cell_seed(0, "tv") != bench.cell_seed(1, "tv")


def test_summary_byte_identical(tmp_path):
    for sub in ("a", "b"):
        bench.run_suite(tmp_path / sub, 0, ("pde", "tv"), {"tv": {"size": 24}})
    for name in ("summary.csv", "references.csv", "checks.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    img = read_pgm(tmp_path / "a" / "tv_denoised.pgm")
    assert img.width == 24


def test_small_wishart_ordering():
    exp = bench.bench_wishart(seed=1, n=96, m=100)
    assert exp.evals("cg") <= exp.evals("esgd(eta=10)")
    assert exp.evals("agd") <= exp.evals("gd")


def test_ratio_check_handles_missing():
    exp = bench.Experiment("x", 1.0)
    exp.cells["a"] = bench.CellResult("a", None, "diverged")
    exp.cells["b"] = bench.CellResult("b", None, "budget")
    assert not bench._ratio_check(exp, "a", "b", 1.0).passed
    assert not bench._order_check(exp, "a", "b", cap=10).passed
