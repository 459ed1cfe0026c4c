"""Iterative solvers: ESGD, PESGD and the GD / AGD / CG baselines.

All runners share the same calling convention, ``run_xxx(problem, stop, ...)
-> (x, Trace)``, and count gradient evaluations the same way so that traces
from different methods can be compared on one axis. CG counts one matrix
product as one gradient evaluation; PESGD reports matrix products in
``grad_evals`` and tracks ``g`` evaluations separately.
"""
from __future__ import annotations

import csv
import logging
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DivergenceError, InvalidInputError, UnsupportedProblemError
from .schedule import DEFAULT_ETA, ChebyshevSchedule, beta_threshold, make_schedule

log = logging.getLogger(__name__)

#: a run is aborted once its gap exceeds this multiple of the initial gap
DIVERGENCE_FACTOR = 1e6
#: gaps below this mean the reference optimum is wrong
NEGATIVE_GAP_TOL = -1e-10

TRACE_COLUMNS = ("outer_iter", "grad_evals", "f_gap", "grad_norm", "elapsed_s")


@dataclass
class StopRule:
    max_grad_evals: int = 100_000
    grad_tol: float = 0.0
    gap_tol: float | None = None

    def __post_init__(self):
        if self.max_grad_evals < 1:
            raise InvalidInputError("max_grad_evals must be positive")
        if self.grad_tol < 0 or (self.gap_tol is not None and self.gap_tol < 0):
            raise InvalidInputError("tolerances must be nonnegative")


@dataclass
class TraceRow:
    outer_iter: int
    grad_evals: int
    f_gap: float
    grad_norm: float
    elapsed: float


@dataclass
class Trace:
    method: str = ""
    rows: list[TraceRow] = field(default_factory=list)
    g_evals: int = 0
    matvecs: int = 0
    converged: bool = False
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    @property
    def grad_evals(self) -> int:
        return self.rows[-1].grad_evals if self.rows else 0

    @property
    def final_gap(self) -> float:
        return self.rows[-1].f_gap

    def evals_to_gap(self, target: float) -> int | None:
        """Gradient evaluations of the first row with ``f_gap <= target``."""
        for r in self.rows:
            if r.f_gap <= target:
                return r.grad_evals
        return None

    def to_csv(self, path, meta: dict | None = None) -> None:
        lines = {**self.meta, **(meta or {})}
        with open(path, "w", newline="") as fh:
            for k, v in lines.items():
                fh.write(f"# {k}={v}\n")
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([r.outer_iter, r.grad_evals, f"{r.f_gap:.17g}",
                            f"{r.grad_norm:.17g}", f"{r.elapsed:.6f}"])


class _Recorder:
    """Appends trace rows and decides when to stop."""

    def __init__(self, problem, stop: StopRule, method: str):
        self.problem = problem
        self.stop = stop
        self.trace = Trace(method=method)
        self.t0 = time.perf_counter()
        self.gap0: float | None = None

    def record(self, outer: int, evals: int, x: np.ndarray, grad: np.ndarray) -> bool:
        """Log one row; return True when the run should terminate."""
        gap = self.problem.gap(x)
        gnorm = float(np.linalg.norm(grad))
        self.trace.rows.append(TraceRow(outer, evals, gap, gnorm, time.perf_counter() - self.t0))
        if not (math.isfinite(gap) and math.isfinite(gnorm)):
            raise DivergenceError(f"{self.trace.method}: non-finite iterate at outer step {outer}",
                                  iteration=outer)
        if gap < NEGATIVE_GAP_TOL:
            raise ConsistencyError(f"{self.trace.method}: gap {gap:.3e} is negative; "
                                   "the reference optimum is inconsistent")
        if self.gap0 is None:
            self.gap0 = abs(gap)
        elif abs(gap) > DIVERGENCE_FACTOR * max(self.gap0, np.finfo(float).tiny):
            raise DivergenceError(
                f"{self.trace.method}: gap grew from {self.gap0:.3e} to {gap:.3e}", iteration=outer)
        if self.stop.gap_tol is not None and gap <= self.stop.gap_tol:
            self.trace.converged = True
            return True
        if gnorm <= self.stop.grad_tol:
            self.trace.converged = True
            return True
        return False

    def budget_allows(self, evals: int, cost: int) -> bool:
        return evals + cost <= self.stop.max_grad_evals


def _start(problem, x0):
    x = problem.initial_point() if x0 is None else np.array(x0, dtype=float)
    if x.shape != (problem.dim,):
        raise InvalidInputError(f"x0 has shape {x.shape}, expected ({problem.dim},)")
    return x


# ----------------------------------------------------------------------------
# baselines


def run_gd(problem, stop: StopRule, h: float | None = None, x0=None):
    """Gradient descent with constant step, by default the optimal ``2 / (ell + L)``."""
    if h is None:
        h = 2.0 / (problem.bounds.ell + problem.bounds.big_l)
    if not h > 0:
        raise InvalidInputError("step size must be positive")
    x = _start(problem, x0)
    rec = _Recorder(problem, stop, "gd")
    rec.trace.meta.update(h=h)
    evals, k = 0, 0
    grad = problem.gradient(x)
    if rec.record(0, 0, x, grad):
        return x, rec.trace
    while rec.budget_allows(evals, 1):
        x = x - h * grad
        evals += 1
        k += 1
        grad = problem.gradient(x)
        if rec.record(k, evals, x, grad):
            break
    return x, rec.trace


def run_agd(problem, stop: StopRule, x0=None):
    """Nesterov's constant-momentum method for strongly convex functions.

    ``x_{k+1} = y_k - grad f(y_k) / L`` and
    ``y_{k+1} = x_{k+1} + q (x_{k+1} - x_k)`` with
    ``q = (sqrt(L) - sqrt(ell)) / (sqrt(L) + sqrt(ell))``. The recorded gradient
    norm is that of the last evaluated gradient, i.e. at ``y_k``.
    """
    ell, big_l = problem.bounds.ell, problem.bounds.big_l
    q = (math.sqrt(big_l) - math.sqrt(ell)) / (math.sqrt(big_l) + math.sqrt(ell))
    x = _start(problem, x0)
    y = x.copy()
    rec = _Recorder(problem, stop, "agd")
    rec.trace.meta.update(momentum=q)
    evals, k = 0, 0
    grad = problem.gradient(y)
    if rec.record(0, 0, x, grad):
        return x, rec.trace
    while rec.budget_allows(evals, 1):
        x_new = y - grad / big_l
        y = x_new + q * (x_new - x)
        x = x_new
        evals += 1
        k += 1
        grad = problem.gradient(y)
        if rec.record(k, evals, x, grad):
            break
    return x, rec.trace


def run_cg(problem, stop: StopRule, x0=None):
    """Conjugate gradients on ``A x = b`` for a quadratic problem."""
    if not (hasattr(problem, "a") and hasattr(problem, "b") and hasattr(problem, "matvec")):
        raise UnsupportedProblemError("CG needs a quadratic problem with explicit A and b")
    x = _start(problem, x0)
    rec = _Recorder(problem, stop, "cg")
    r = problem.b - problem.matvec(x)
    evals = 1 if np.any(x) else 0
    p = r.copy()
    rr = float(r @ r)
    k = 0
    if rec.record(0, evals, x, -r):
        return x, rec.trace
    while rec.budget_allows(evals, 1) and rr > 0.0:
        ap = problem.matvec(p)
        evals += 1
        step = rr / float(p @ ap)
        x = x + step * p
        r = r - step * ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        k += 1
        if rec.record(k, evals, x, -r):
            break
    return x, rec.trace


# ----------------------------------------------------------------------------
# explicit stabilised gradient descent


def esgd_outer_step(problem, sched: ChebyshevSchedule, x: np.ndarray,
                    grad0: np.ndarray | None = None, stage_callback=None) -> np.ndarray:
    """One outer ESGD step: ``s`` damped Chebyshev stages from ``x``.

    ``grad0`` may carry an already computed ``grad f(x)``; it then counts as
    the first of the ``s`` evaluations. ``stage_callback(j, x_j)`` is called
    after each internal stage.
    """
    h, mu, nu = sched.h, sched.mu, sched.nu
    g = problem.gradient(x) if grad0 is None else grad0
    x_prev = x
    x_cur = x - h * mu[0] * g
    if stage_callback is not None:
        stage_callback(1, x_cur)
    for j in range(2, sched.s + 1):
        g = problem.gradient(x_cur)
        x_next = nu[j - 1] * x_cur - (nu[j - 1] - 1.0) * x_prev - (mu[j - 1] * h) * g
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(f"non-finite iterate at internal stage {j}", stage=j)
        x_prev, x_cur = x_cur, x_next
        if stage_callback is not None:
            stage_callback(j, x_cur)
    if not np.all(np.isfinite(x_cur)):
        raise DivergenceError("non-finite iterate at internal stage 1", stage=1)
    return x_cur


def run_esgd(problem, eta: float = DEFAULT_ETA, stop: StopRule | None = None, x0=None,
             sched: ChebyshevSchedule | None = None):
    """Explicit stabilised gradient descent with the schedule for ``problem.bounds``."""
    stop = stop or StopRule()
    sched = sched or make_schedule(problem.bounds, eta)
    x = _start(problem, x0)
    rec = _Recorder(problem, stop, f"esgd(eta={sched.eta:g})")
    rec.trace.meta.update(eta=sched.eta, s=sched.s, h=sched.h, alpha=sched.profile.alpha)
    evals, n = 0, 0
    grad = problem.gradient(x)
    if rec.record(0, 0, x, grad):
        return x, rec.trace
    while rec.budget_allows(evals, sched.s):
        try:
            x = esgd_outer_step(problem, sched, x, grad0=grad)
        except DivergenceError as exc:
            exc.iteration = n + 1
            raise
        evals += sched.s
        n += 1
        grad = problem.gradient(x)
        if rec.record(n, evals, x, grad):
            break
    return x, rec.trace


def pesgd_outer_step(problem, sched: ChebyshevSchedule, x: np.ndarray,
                     g0: np.ndarray | None = None, ax0: np.ndarray | None = None) -> np.ndarray:
    """One outer step of the partitioned scheme for ``x^T A x / 2 + g(x)``.

    ``grad g`` is frozen at ``x`` for all ``s`` stages, so the step equals
    ``R_s(-hA) x - (I - R_s(-hA)) A^{-1} grad g(x)``.
    """
    h, mu, nu = sched.h, sched.mu, sched.nu
    forcing = problem.g_gradient(x) if g0 is None else g0
    ax = problem.a_matvec(x) if ax0 is None else ax0
    x_prev = x
    x_cur = x - (mu[0] * h) * (ax + forcing)
    for j in range(2, sched.s + 1):
        ax = problem.a_matvec(x_cur)
        x_next = nu[j - 1] * x_cur - (nu[j - 1] - 1.0) * x_prev - (mu[j - 1] * h) * (ax + forcing)
        if not np.all(np.isfinite(x_next)):
            raise DivergenceError(f"non-finite iterate at internal stage {j}", stage=j)
        x_prev, x_cur = x_cur, x_next
    if not np.all(np.isfinite(x_cur)):
        raise DivergenceError("non-finite iterate at internal stage 1", stage=1)
    return x_cur


def run_pesgd(problem, eta: float = DEFAULT_ETA, stop: StopRule | None = None, x0=None,
              gamma: float | None = None, sched: ChebyshevSchedule | None = None):
    """Partitioned ESGD: one ``grad g`` and ``s`` products with ``A`` per outer step.

    When ``gamma`` is given the smoothness of ``g`` is compared with the
    contraction threshold ``gamma * ell * C(eta)`` and a warning is issued if
    it is exceeded; the run proceeds either way.
    """
    stop = stop or StopRule()
    sched = sched or make_schedule(problem.bounds, eta)
    if gamma is not None:
        thr = beta_threshold(problem.bounds, sched.eta, gamma)
        if problem.beta >= thr:
            warnings.warn(f"beta={problem.beta:.3e} >= gamma*ell*C(eta)={thr:.3e}; "
                          "the contraction guarantee does not apply", stacklevel=2)
    x = _start(problem, x0)
    rec = _Recorder(problem, stop, f"pesgd(eta={sched.eta:g})")
    rec.trace.meta.update(eta=sched.eta, s=sched.s, h=sched.h, alpha=sched.profile.alpha)
    tr = rec.trace
    n = 0
    gx = problem.g_gradient(x)
    ax = problem.a_matvec(x)
    if rec.record(0, 0, x, ax + gx):
        return x, tr
    while rec.budget_allows(tr.matvecs, sched.s):
        try:
            x = pesgd_outer_step(problem, sched, x, g0=gx, ax0=ax)
        except DivergenceError as exc:
            exc.iteration = n + 1
            raise
        tr.matvecs += sched.s
        tr.g_evals += 1
        n += 1
        gx = problem.g_gradient(x)
        ax = problem.a_matvec(x)
        if rec.record(n, tr.matvecs, x, ax + gx):
            break
    tr.meta.update(g_evals=tr.g_evals, matvecs=tr.matvecs)
    return x, tr


SOLVERS = {
    "gd": run_gd,
    "agd": run_agd,
    "cg": run_cg,
    "esgd": run_esgd,
    "pesgd": run_pesgd,
}
