import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esgd.errors import ConsistencyError, DivergenceError, InvalidInputError, UnsupportedProblemError
from esgd.problems import CompositeProblem, QuadraticProblem, make_logistic
from esgd.schedule import SpectralBounds, make_schedule, select_stages
from esgd.solvers import (TRACE_COLUMNS, StopRule, run_agd, run_cg, run_esgd, run_gd, run_pesgd)


def spd_problem(seed, d=20, ell=1.0, big_l=100.0):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    lam = np.concatenate([[ell, big_l], rng.uniform(ell, big_l, d - 2)])
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    return QuadraticProblem(a, rng.standard_normal(d), known_bounds=SpectralBounds(ell, big_l))


@pytest.mark.parametrize("runner", [run_gd, run_agd, run_cg,
                                    lambda p, stop: run_esgd(p, 1.17, stop),
                                    lambda p, stop: run_esgd(p, 10.0, stop)])
def test_solvers_converge(runner):
    prob = spd_problem(0)
    x, tr = runner(prob, StopRule(max_grad_evals=20_000, gap_tol=1e-12))
    assert tr.converged
    assert np.linalg.norm(x - prob.x_star) < 1e-4
    evals = tr.column("grad_evals")
    assert np.all(np.diff(evals) > 0)


def test_cg_finishes_in_dim_steps():
    prob = spd_problem(1, d=15)
    _, tr = run_cg(prob, StopRule(max_grad_evals=1000, grad_tol=1e-9))
    assert tr.converged and tr.grad_evals <= 15 + 5


def test_cg_needs_quadratic():
    rng = np.random.default_rng(0)
    prob = make_logistic(rng.standard_normal((10, 3)), np.ones(10), 1.0)
    with pytest.raises(UnsupportedProblemError):
        run_cg(prob, StopRule())


def test_esgd_counts_s_evals_per_step():
    prob = spd_problem(2)
    s = select_stages(prob.bounds, 1.17)
    _, tr = run_esgd(prob, 1.17, StopRule(max_grad_evals=10 * s))
    np.testing.assert_array_equal(tr.column("grad_evals"), s * np.arange(11))
    assert tr.meta["s"] == s


@settings(max_examples=30, deadline=None)
@given(budget=st.integers(1, 400), eta=st.sampled_from([1.17, 2.0, 10.0]))
def test_budget_never_exceeded(budget, eta):
    prob = spd_problem(3, d=8)
    stop = StopRule(max_grad_evals=budget)
    for tr in (run_esgd(prob, eta, stop)[1], run_gd(prob, stop)[1], run_agd(prob, stop)[1]):
        assert tr.grad_evals <= budget


def test_gd_step_default():
    prob = spd_problem(4)
    _, tr = run_gd(prob, StopRule(max_grad_evals=1))
    assert tr.meta["h"] == pytest.approx(2.0 / 101.0)


def test_divergence_is_reported():
    prob = spd_problem(5)
    bad = QuadraticProblem(prob.a, prob.b, known_bounds=SpectralBounds(1.0, 10.0))
    with pytest.raises(DivergenceError) as info:
        run_esgd(bad, 1.17, StopRule(max_grad_evals=100_000))
    assert info.value.iteration is not None


def test_negative_gap_is_inconsistent():
    rng = np.random.default_rng(6)
    prob = make_logistic(rng.standard_normal((20, 3)), np.ones(20), 1.0)
    x_ref, _ = run_agd(prob, StopRule(max_grad_evals=10_000, grad_tol=1e-12))
    prob.f_star = prob.value(x_ref) + 1e-6
    with pytest.raises(ConsistencyError):
        run_gd(prob, StopRule(max_grad_evals=10_000))


def test_x0_shape_checked():
    with pytest.raises(InvalidInputError):
        run_gd(spd_problem(0), StopRule(), x0=np.zeros(3))


def test_stop_rule_validation():
    with pytest.raises(InvalidInputError):
        StopRule(max_grad_evals=0)
    with pytest.raises(InvalidInputError):
        StopRule(grad_tol=-1.0)


def composite_pair(seed):
    prob = spd_problem(seed, d=12)
    b = prob.b
    comp = CompositeProblem(prob.a, lambda x: -b, prob.bounds, g_value=lambda x: -float(b @ x),
                            f_star=prob.f_star)
    return prob, comp


def test_pesgd_linear_g_matches_esgd():
    quad, comp = composite_pair(7)
    stop = StopRule(max_grad_evals=600)
    x_e, tr_e = run_esgd(quad, 2.0, stop)
    x_p, tr_p = run_pesgd(comp, 2.0, stop)
    np.testing.assert_allclose(x_p, x_e, rtol=1e-10, atol=1e-12)
    np.testing.assert_array_equal(tr_p.column("grad_evals"), tr_e.column("grad_evals"))
    assert tr_p.g_evals == tr_p.rows[-1].outer_iter
    assert tr_p.matvecs == tr_p.grad_evals


def test_pesgd_fixed_point_is_solution():
    """The partitioned map is R x - (I - R) A^{-1} G, so x* is a fixed point."""
    rng = np.random.default_rng(8)
    quad = spd_problem(8, d=10)
    c = rng.standard_normal(10)
    comp = CompositeProblem(quad.a, lambda x: 0.05 * np.tanh(x - c), quad.bounds, beta=0.05)
    x = np.zeros(10)
    for _ in range(100):
        x = np.linalg.solve(quad.a + 0.05 * np.diag(1 / np.cosh(x - c) ** 2),
                            quad.a @ x - comp.gradient(x) + 0.05 * np.diag(1 / np.cosh(x - c) ** 2) @ x)
    assert np.linalg.norm(comp.gradient(x)) < 1e-12
    from esgd.solvers import pesgd_outer_step
    x1 = pesgd_outer_step(comp, make_schedule(quad.bounds, 2.0), x)
    np.testing.assert_allclose(x1, x, atol=1e-11)


def test_pesgd_warns_above_threshold():
    quad = spd_problem(9, d=6)
    comp = CompositeProblem(quad.a, lambda x: np.zeros(6), quad.bounds, beta=10.0)
    with pytest.warns(UserWarning, match="contraction guarantee"):
        run_pesgd(comp, 2.0, StopRule(max_grad_evals=50), x0=np.ones(6), gamma=0.5)


def test_trace_csv_round_trip(tmp_path):
    prob = spd_problem(10)
    _, tr = run_esgd(prob, 2.0, StopRule(max_grad_evals=200))
    path = tmp_path / "t.csv"
    tr.to_csv(path, meta={"seed": 5})
    lines = path.read_text().splitlines()
    assert "# seed=5" in lines
    body = [ln for ln in lines if not ln.startswith("#")]
    rows = list(csv.reader(body))
    assert tuple(rows[0]) == TRACE_COLUMNS
    gaps = [float(r[2]) for r in rows[1:]]
    assert gaps == tr.column("f_gap").tolist()


def test_evals_to_gap():
    prob = spd_problem(11)
    _, tr = run_cg(prob, StopRule(max_grad_evals=100))
    target = tr.rows[3].f_gap
    assert tr.evals_to_gap(target) <= tr.rows[3].grad_evals
    assert tr.evals_to_gap(-1.0) is None
