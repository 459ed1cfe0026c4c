"""Desk-scale benchmark suite: five problem families, several solvers each.

Each experiment builds its problem from a seed derived from the master seed
and the experiment name, computes a tight reference solution, runs the
solvers to a common target and evaluates the expected orderings of their
gradient-evaluation counts.
"""
from __future__ import annotations

import csv
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivergenceError, ESGDError
from .io import read_pgm, write_pgm
from .problems import (ImageGrid, QuadraticProblem, estimate_bounds, make_elastic_net,
                       make_logistic, make_pde, make_tv, make_wishart_quadratic,
                       synthetic_classification, synthetic_image, synthetic_regression)
from .solvers import StopRule, Trace, run_agd, run_cg, run_esgd, run_gd, run_pesgd

log = logging.getLogger(__name__)

EXPERIMENTS = ("wishart", "logistic", "elastic_net", "pde", "tv")
GD_CAP = 200_000
REFERENCE_GRAD_TOL = 1e-10
SUMMARY_COLUMNS = ("problem", "solver", "target", "grad_evals_to_target", "total_grad_evals",
                   "outer_iters", "g_evals", "final_gap", "status")


def cell_seed(master_seed: int, cell_id: str) -> int:
    """Independent 32-bit seed for one benchmark cell."""
    ss = np.random.SeedSequence([int(master_seed), zlib.crc32(cell_id.encode())])
    return int(ss.generate_state(1)[0])


@dataclass
class CellResult:
    solver: str
    trace: Trace | None
    status: str
    x: np.ndarray | None = field(default=None, repr=False)

    def evals_to(self, target: float) -> int | None:
        return None if self.trace is None else self.trace.evals_to_gap(target)


@dataclass
class Check:
    label: str
    passed: bool
    detail: str = ""


@dataclass
class Experiment:
    name: str
    target: float
    cells: dict[str, CellResult] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    f_star: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def evals(self, solver: str) -> int | None:
        return self.cells[solver].evals_to(self.target)


def _run(label: str, fn, *args, **kwargs) -> CellResult:
    try:
        x, trace = fn(*args, **kwargs)
    except DivergenceError as exc:
        log.warning("%s diverged: %s", label, exc)
        return CellResult(label, None, f"diverged(stage={exc.stage},iter={exc.iteration})")
    except ESGDError as exc:
        log.warning("%s failed: %s", label, exc)
        return CellResult(label, None, f"error:{type(exc).__name__}")
    status = "converged" if trace.converged else "budget"
    return CellResult(label, trace, status, x)


def _fmt(v) -> str:
    return "none" if v is None else str(v)


def _ratio_check(exp: Experiment, fast: str, slow: str, factor: float) -> Check:
    a, b = exp.evals(fast), exp.evals(slow)
    ok = a is not None and b is not None and a <= factor * b
    return Check(f"{exp.name}: {fast} <= {factor:g} x {slow}", ok, f"{_fmt(a)} vs {_fmt(b)}")


def _order_check(exp: Experiment, first: str, second: str, cap: int | None = None) -> Check:
    """``first <= second``; a run of ``second`` that hit ``cap`` counts as ``cap``."""
    a, b = exp.evals(first), exp.evals(second)
    if b is None and cap is not None and exp.cells[second].status == "budget":
        b_eff = cap
    else:
        b_eff = b
    ok = a is not None and b_eff is not None and a <= b_eff
    return Check(f"{exp.name}: {first} <= {second}", ok, f"{_fmt(a)} vs {_fmt(b)}")


def _standard_cells(exp: Experiment, problem, stop: StopRule, gd_stop: StopRule) -> None:
    exp.cells["gd"] = _run("gd", run_gd, problem, gd_stop)
    exp.cells["agd"] = _run("agd", run_agd, problem, stop)
    exp.cells["esgd(eta=1.17)"] = _run("esgd(eta=1.17)", run_esgd, problem, 1.17, stop)
    exp.cells["esgd(eta=10)"] = _run("esgd(eta=10)", run_esgd, problem, 10.0, stop)


def _set_reference(problem, exp: Experiment, budget: int = 500_000) -> None:
    """Fix ``f*`` from a tightly converged AGD run."""
    x_ref, tr = run_agd(problem, StopRule(max_grad_evals=budget, grad_tol=REFERENCE_GRAD_TOL))
    problem.f_star = problem.value(x_ref)
    exp.f_star = problem.f_star
    exp.meta.update(reference="agd", reference_grad_norm=tr.rows[-1].grad_norm,
                    reference_evals=tr.grad_evals)


# ----------------------------------------------------------------------------
# experiments


def bench_wishart(seed: int, n: int = 480, m: int = 500, rel_target: float = 1e-9,
                  budget: int = 100_000, gd_cap: int = GD_CAP) -> Experiment:
    """Wishart quadratic with bounds taken from its measured spectrum."""
    base = make_wishart_quadratic(n, m, seed)
    problem = QuadraticProblem(base.a, base.b, known_bounds=estimate_bounds(base.a, mode="exact"))
    target = rel_target * problem.gap(problem.initial_point())
    exp = Experiment("wishart", target, meta=dict(n=n, m=m, seed=seed, kappa=problem.bounds.kappa))
    exp.f_star = problem.f_star
    stop = StopRule(max_grad_evals=budget, gap_tol=target)
    _standard_cells(exp, problem, stop, StopRule(max_grad_evals=gd_cap, gap_tol=target))
    exp.cells["cg"] = _run("cg", run_cg, problem, stop)
    exp.checks += [
        _order_check(exp, "cg", "esgd(eta=10)"),
        _ratio_check(exp, "esgd(eta=10)", "cg", 2.0),
        _order_check(exp, "esgd(eta=1.17)", "agd"),
        _order_check(exp, "agd", "gd", cap=gd_cap),
    ]
    return exp


def bench_logistic(seed: int, m: int = 400, d: int = 100, tau: float = 1e-3,
                   target: float = 1e-5, budget: int = 100_000) -> Experiment:
    design, labels = synthetic_classification(m, d, seed=seed, tau=tau)
    problem = make_logistic(design, labels, tau)
    exp = Experiment("logistic", target, meta=dict(m=m, d=d, tau=tau, seed=seed,
                                                   kappa=problem.bounds.kappa))
    _set_reference(problem, exp)
    stop = StopRule(max_grad_evals=budget, gap_tol=target)
    _standard_cells(exp, problem, stop, StopRule(max_grad_evals=GD_CAP, gap_tol=target))
    exp.checks += [_ratio_check(exp, "esgd(eta=1.17)", "agd", 1.0),
                   _ratio_check(exp, "esgd(eta=10)", "agd", 0.7)]
    return exp


def bench_elastic_net(seed: int, d: int = 300, m: int = 90, lam: float = 0.2, tau: float = 1e-3,
                      ell: float = 1e-2, target: float = 1e-5, budget: int = 20_000) -> Experiment:
    a, b = synthetic_regression(m, d, seed=seed)
    problem = make_elastic_net(a, b, lam, tau, ell)
    exp = Experiment("elastic_net", target, meta=dict(m=m, d=d, lam=lam, tau=tau, ell=ell,
                                                      seed=seed, kappa=problem.bounds.kappa))
    _set_reference(problem, exp)
    stop = StopRule(max_grad_evals=budget, gap_tol=target)
    _standard_cells(exp, problem, stop, StopRule(max_grad_evals=GD_CAP, gap_tol=target))
    exp.checks += [_ratio_check(exp, "esgd(eta=1.17)", "agd", 1.0),
                   _ratio_check(exp, "esgd(eta=10)", "agd", 0.7)]
    return exp


def bench_pde(d: int = 100, rel_target: float = 1e-8, budget: int = 100_000) -> Experiment:
    """Integro-differential BVP; the gap column holds the residual norm."""
    problem = make_pde(d)
    target = rel_target * problem.gap(problem.initial_point())
    exp = Experiment("pde", target, meta=dict(d=d, kappa=problem.bounds.kappa))
    stop = StopRule(max_grad_evals=budget, gap_tol=target)
    _standard_cells(exp, problem, stop, StopRule(max_grad_evals=GD_CAP, gap_tol=target))
    for eta in (1.17, 10.0):
        exp.cells[f"pesgd(eta={eta:g})"] = _run(f"pesgd(eta={eta:g})", run_pesgd, problem, eta, stop)
    for eta in ("1.17", "10"):
        for method in ("esgd", "pesgd"):
            key = f"{method}(eta={eta})"
            n = exp.evals(key)
            exp.checks.append(Check(f"pde: {key} reaches relative residual {rel_target:g}",
                                    n is not None, _fmt(n)))
        exp.checks.append(_pesgd_accounting(exp, eta))
    return exp


def _pesgd_accounting(exp: Experiment, eta: str) -> Check:
    """One g evaluation per outer step, and as many products with A as ESGD has gradients."""
    p, e = exp.cells[f"pesgd(eta={eta})"].trace, exp.cells[f"esgd(eta={eta})"].trace
    label = f"pde: pesgd(eta={eta}) evaluation accounting"
    if p is None or e is None:
        return Check(label, False, "missing trace")
    steps = p.rows[-1].outer_iter
    common = min(len(p.rows), len(e.rows))
    same = all(p.rows[k].grad_evals == e.rows[k].grad_evals for k in range(common))
    ok = p.g_evals == steps and same
    return Check(label, ok, f"g_evals={p.g_evals}, outer_steps={steps}, matvecs match={same}")


def bench_tv(seed: int, size: int = 64, lam: float = 6e-2, eps: float = 1e-4,
             target: float = 1e-5, budget: int = 100_000) -> Experiment:
    _, noisy = synthetic_image(size, seed=seed)
    problem = make_tv(noisy, lam, eps)
    exp = Experiment("tv", target, meta=dict(size=size, lam=lam, eps=eps, seed=seed,
                                             kappa=problem.bounds.kappa))
    _set_reference(problem, exp)
    stop = StopRule(max_grad_evals=budget, gap_tol=target)
    _standard_cells(exp, problem, stop, StopRule(max_grad_evals=GD_CAP, gap_tol=target))
    exp.meta["noisy"] = noisy
    cell = exp.cells["esgd(eta=1.17)"]
    if cell.trace is not None:
        gaps = cell.trace.column("f_gap")
        slack = 1e-12 * max(1.0, abs(exp.f_star))
        mono = bool(np.all(np.diff(gaps) <= slack))
        exp.checks.append(Check("tv: esgd(eta=1.17) monotone in f", mono,
                                f"max increase {np.diff(gaps).max(initial=0.0):.3e}"))
        exp.meta["denoised"] = ImageGrid(noisy.width, noisy.height,
                                         np.clip(cell.x, 0.0, 1.0))
    else:
        exp.checks.append(Check("tv: esgd(eta=1.17) monotone in f", False, cell.status))
    exp.checks.append(_order_check(exp, "esgd(eta=1.17)", "agd"))
    return exp


def run_experiment(name: str, master_seed: int = 0, **params) -> Experiment:
    seed = cell_seed(master_seed, name)
    if name == "wishart":
        return bench_wishart(seed, **params)
    if name == "logistic":
        return bench_logistic(seed, **params)
    if name == "elastic_net":
        return bench_elastic_net(seed, **params)
    if name == "pde":
        return bench_pde(**params)
    if name == "tv":
        return bench_tv(seed, **params)
    raise KeyError(name)


# ----------------------------------------------------------------------------
# persistence


def write_experiment(exp: Experiment, out_dir: Path, master_seed: int) -> None:
    for solver, cell in exp.cells.items():
        if cell.trace is not None:
            fname = out_dir / f"{exp.name}__{solver.replace('(', '_').replace(')', '').replace('=', '')}.csv"
            cell.trace.to_csv(fname, meta={"seed": master_seed, "problem": exp.name,
                                           "target": f"{exp.target:.17g}"})
    if exp.name == "tv" and "denoised" in exp.meta:
        path = out_dir / "tv_denoised.pgm"
        write_pgm(path, exp.meta["denoised"])
        write_pgm(out_dir / "tv_noisy.pgm", exp.meta["noisy"])
        img = read_pgm(path)
        ok = (img.width, img.height) == (exp.meta["denoised"].width, exp.meta["denoised"].height)
        exp.checks.append(Check("tv: denoised image written as valid PGM", ok, str(path.name)))


def summary_rows(exp: Experiment):
    for solver, cell in exp.cells.items():
        tr = cell.trace
        yield {
            "problem": exp.name,
            "solver": solver,
            "target": f"{exp.target:.17g}",
            "grad_evals_to_target": _fmt(cell.evals_to(exp.target)),
            "total_grad_evals": "" if tr is None else tr.grad_evals,
            "outer_iters": "" if tr is None else tr.rows[-1].outer_iter,
            "g_evals": "" if tr is None else tr.g_evals,
            "final_gap": "" if tr is None else f"{tr.final_gap:.17g}",
            "status": cell.status,
        }


def run_suite(out_dir, master_seed: int = 0, experiments=EXPERIMENTS,
              params: dict | None = None) -> list[Experiment]:
    """Run the selected experiments and write traces, ``summary.csv`` and ``checks.csv``.

    Cells run one after another; the summary does not depend on timing and
    is byte-identical across reruns with the same seed.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = params or {}
    results = []
    for name in experiments:
        log.info("running experiment %s", name)
        exp = run_experiment(name, master_seed, **params.get(name, {}))
        write_experiment(exp, out_dir, master_seed)
        results.append(exp)
    with open(out_dir / "summary.csv", "w", newline="") as fh:
        fh.write(f"# seed={master_seed}\n")
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        w.writeheader()
        for exp in results:
            w.writerows(summary_rows(exp))
    with open(out_dir / "references.csv", "w", newline="") as fh:
        fh.write(f"# seed={master_seed}\n")
        w = csv.writer(fh)
        w.writerow(["problem", "f_star", "kappa"])
        for exp in results:
            w.writerow([exp.name, _fmt(None if exp.f_star is None else f"{exp.f_star:.17g}"),
                        f"{exp.meta['kappa']:.17g}"])
    with open(out_dir / "checks.csv", "w", newline="") as fh:
        fh.write(f"# seed={master_seed}\n")
        w = csv.writer(fh)
        w.writerow(["check", "passed", "detail"])
        for exp in results:
            for c in exp.checks:
                w.writerow([c.label, int(c.passed), c.detail])
    return results
