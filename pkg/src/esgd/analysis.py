"""Theory checks: stability domains, rate gaps, the damping crossover and
an identity suite that ties the polynomial view to the stage recursion."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .cheb import (StabilityProfile, alpha_closed_form, cheb_t, make_profile,
                   stability_b, stability_r)
from .errors import AnalysisError, InvalidInputError
from .problems import CompositeProblem
from .schedule import ChebyshevSchedule, SpectralBounds, effective_rate, reference_rates
from .solvers import pesgd_outer_step

MAX_RESOLUTION = 4096

#: default kappa range of the crossover search (see ``find_eta0``)
ETA0_KAPPA_RANGE = (1e4, 1e8)
ETA0_GRID_POINTS = 25


# ----------------------------------------------------------------------------
# complex stability domains


@dataclass
class StabilityGrid:
    """``|R_s(z)|`` sampled at cell centres; ``values[j, i]`` is at ``(re[i], im[j])``."""

    s: int
    eta: float
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    nx: int
    ny: int
    values: np.ndarray = field(repr=False)
    strip_max: float | None = None

    @property
    def re(self) -> np.ndarray:
        w = (self.re_max - self.re_min) / self.nx
        return self.re_min + (np.arange(self.nx) + 0.5) * w

    @property
    def im(self) -> np.ndarray:
        w = (self.im_max - self.im_min) / self.ny
        return self.im_min + (np.arange(self.ny) + 0.5) * w


def damped_strip_max(profile: StabilityProfile, n: int = 100, margin: float = 0.01) -> float:
    """Largest ``|R_s|`` on a thin strip around the interior of the damped interval.

    The strip has half-width ``margin * min(delta, 1)`` and spans
    ``[-L + m, -delta - m]`` with ``m = margin * delta``; for ``eta > 0`` the
    result should be below 1.
    """
    m = margin * profile.delta
    half = margin * min(profile.delta, 1.0)
    x = np.linspace(-profile.l_damped + m, -profile.delta - m, n)
    z = np.concatenate([x + 1j * half, x - 1j * half])
    return float(np.abs(stability_r(profile, z)).max())


def stability_domain(s: int, eta: float, window=None, resolution=(460, 200)) -> StabilityGrid:
    """Sample ``|R_s|`` on a rectangle of the complex plane.

    ``window`` is ``(re_min, re_max, im_min, im_max)``; the default
    ``[-2.2 s^2, 0.1 s^2] x [-s^2, s^2]`` encloses the undamped domain.
    """
    nx, ny = resolution
    if not (1 <= nx <= MAX_RESOLUTION and 1 <= ny <= MAX_RESOLUTION):
        raise InvalidInputError(f"resolution must be within 1..{MAX_RESOLUTION} per axis")
    profile = make_profile(s, eta)
    s2 = float(s * s)
    if window is None:
        window = (-2.2 * s2, 0.1 * s2, -s2, s2)
    re_min, re_max, im_min, im_max = map(float, window)
    if not (re_min < re_max and im_min < im_max):
        raise InvalidInputError("window must have positive extent")
    grid = StabilityGrid(s, float(eta), re_min, re_max, im_min, im_max, nx, ny,
                         values=np.empty((ny, nx)))
    z = grid.re[None, :] + 1j * grid.im[:, None]
    grid.values = np.abs(stability_r(profile, z))
    if eta > 0:
        grid.strip_max = damped_strip_max(profile)
    return grid


# ----------------------------------------------------------------------------
# rate gap and crossover


@dataclass(frozen=True)
class RateGapRow:
    kappa: float
    eta: float
    c_esgd: float
    c_opt: float
    c_agd: float

    @property
    def gap(self) -> float:
        return self.c_esgd - self.c_opt


def rate_gap_table(kappa_grid, eta_list) -> list[RateGapRow]:
    """One row per ``(eta, kappa)``, ordered by ``eta`` then ``kappa``."""
    rows = []
    for eta in eta_list:
        for kappa in kappa_grid:
            c_opt, c_agd, _ = reference_rates(float(kappa))
            rows.append(RateGapRow(float(kappa), float(eta), effective_rate(float(kappa), eta),
                                   c_opt, c_agd))
    return rows


def fit_slope(rows, eta: float) -> tuple[float, float]:
    """Least-squares ``(slope, intercept)`` of ``log gap`` against ``log kappa``.

    Only the upper half of the kappa range (in log scale) is used, which keeps
    the pre-asymptotic curvature at small kappa out of the fit.
    """
    sel = [r for r in rows if r.eta == eta and r.gap > 0]
    if len(sel) < 8:
        raise InvalidInputError("slope fit needs at least 8 rows for this eta")
    lk = np.log([r.kappa for r in sel])
    mid = 0.5 * (lk.min() + lk.max())
    keep = lk >= mid
    slope, intercept = np.polyfit(lk[keep], np.log([r.gap for r in sel])[keep], 1)
    return float(slope), float(intercept)


def default_eta0_grid() -> np.ndarray:
    return np.geomspace(*ETA0_KAPPA_RANGE, ETA0_GRID_POINTS)


def esgd_beats_agd(eta: float, kappa_grid) -> bool:
    return all(effective_rate(float(k), eta) <= reference_rates(float(k))[1] for k in kappa_grid)


def find_eta0(kappa_grid=None, tol: float = 1e-3, eta_max: float = 50.0) -> float:
    """Smallest damping at which ESGD's per-evaluation rate beats AGD's on every grid point.

    Bisection on ``eta`` between ``tol`` and ``eta_max``. Because stage counts
    are integers the predicate is only approximately monotone; the grid
    defaults to large condition numbers where the rounding matters least.
    """
    grid = default_eta0_grid() if kappa_grid is None else np.asarray(kappa_grid, dtype=float)
    if grid.size < 8:
        raise InvalidInputError("the kappa grid needs at least 8 points")
    if not esgd_beats_agd(eta_max, grid):
        raise AnalysisError(f"ESGD does not beat AGD on the grid for any eta <= {eta_max}")
    lo, hi = tol, eta_max
    if esgd_beats_agd(lo, grid):
        return lo
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if esgd_beats_agd(mid, grid):
            hi = mid
        else:
            lo = mid
    return hi


def asymptotic_eta0() -> float:
    """Large-kappa limit of the crossover, ignoring integer rounding of ``s``.

    With ``s = sqrt(kappa eta / 2)`` the two rates agree to leading order when
    ``log cosh(u) = u / sqrt(3)`` for ``u = sqrt(2 eta)``.
    """
    u = brentq(lambda u: math.log(math.cosh(u)) - u / math.sqrt(3.0), 0.5, 10.0, xtol=1e-14)
    return 0.5 * u * u


# ----------------------------------------------------------------------------
# identity suite


@dataclass(frozen=True)
class IdentityResult:
    name: str
    s: int
    eta: float
    worst_error: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.worst_error <= self.tol)


@dataclass
class VerifyReport:
    results: list[IdentityResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list[IdentityResult]:
        return [r for r in self.results if not r.passed]

    def worst(self, name: str) -> float:
        return max(r.worst_error for r in self.results if r.name == name)


def _check_alpha(p: StabilityProfile) -> float:
    ref = alpha_closed_form(p.s, p.eta)
    return abs(1.0 / cheb_t(p.s, p.omega0) - ref) / ref


def _check_equioscillation(p: StabilityProfile, n: int = 10_000) -> float:
    """Relative excess of ``max |R|`` over ``alpha`` plus alternation defects.

    Also evaluates ``R`` at the images of the Chebyshev extrema, where it must
    equal ``alpha (-1)^k``; fewer than ``s`` sign changes there counts as a
    failure of size 1.
    """
    z = np.linspace(-p.l_damped, -p.delta, n)
    excess = max(0.0, np.abs(stability_r(p, z)).max() / p.alpha - 1.0)
    k = np.arange(p.s + 1)
    zk = (np.cos(k * np.pi / p.s) - p.omega0) / p.omega1
    rk = np.asarray(stability_r(p, zk))
    level = np.abs(rk / (p.alpha * (-1.0) ** k) - 1.0).max()
    changes = int(np.sum(np.sign(rk[1:]) != np.sign(rk[:-1])))
    return max(excess, level, 0.0 if changes >= p.s else 1.0)


def _check_forcing_bound(p: StabilityProfile) -> float:
    """``| max |B_s| - 1 |`` over ``[-L, 0]``, refined geometrically near 0."""
    z = np.concatenate([np.linspace(-p.l_damped, 0.0, 10_000),
                        -p.l_damped * np.geomspace(1e-7, 1e-2, 200)])
    return abs(float(np.abs(stability_b(p, z)).max()) - 1.0)


def _stage_scalar(p: StabilityProfile, lam: float) -> float:
    """Run the stage recursion on ``f(x) = lam x^2 / 2`` from ``x = 1`` with ``h = 1``."""
    mu, nu = p.stage_coefficients()
    x_prev, x_cur = 1.0, 1.0 - mu[0] * lam
    for j in range(2, p.s + 1):
        x_prev, x_cur = x_cur, nu[j - 1] * x_cur - (nu[j - 1] - 1.0) * x_prev - mu[j - 1] * lam * x_cur
    return x_cur


def _check_stages(p: StabilityProfile, rng, draws: int = 20) -> float:
    lams = rng.uniform(p.delta, p.l_damped, draws)
    errs = [abs(_stage_scalar(p, lam) - stability_r(p, -lam)) / p.alpha for lam in lams]
    return float(max(errs))


def _check_composite(p: StabilityProfile, rng, dim: int = 8) -> float:
    """Partitioned step versus ``R x - h B(-hA) G`` built by eigendecomposition."""
    ell = 1.0
    h = p.delta / ell
    big_l = p.l_damped / h
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lam = np.concatenate([[ell, big_l], rng.uniform(ell, big_l, dim - 2)])
    a = (q * lam) @ q.T
    a = 0.5 * (a + a.T)
    forcing = rng.standard_normal(dim)
    x = rng.standard_normal(dim)
    bounds = SpectralBounds(ell, big_l)
    mu, nu = p.stage_coefficients()
    sched = ChebyshevSchedule(p, h, bounds, mu, nu)
    problem = CompositeProblem(a, lambda _: forcing, bounds)
    stepped = pesgd_outer_step(problem, sched, x, g0=forcing)
    r_diag = np.asarray(stability_r(p, -h * lam))
    b_diag = np.asarray(stability_b(p, -h * lam))
    direct = q @ (r_diag * (q.T @ x) - h * b_diag * (q.T @ forcing))
    return float(np.linalg.norm(stepped - direct) / max(np.linalg.norm(direct), 1e-300))


def verify_identities(s_list, eta_list, omega1_perturbation: float = 0.0,
                      seed: int = 0) -> VerifyReport:
    """Run every identity for each ``(s, eta)`` and report the worst errors.

    ``omega1_perturbation`` scales ``omega1`` by ``1 + perturbation`` after
    the profile is built; it exists to show that the suite detects a wrong
    coefficient.
    """
    rng = np.random.default_rng(seed)
    results = []
    tols = {"alpha_closed_form": 1e-10, "equioscillation": 1e-10, "forcing_bound": 1e-6,
            "stage_equivalence": 1e-11, "composite_identity": 1e-9}
    for s in s_list:
        undamped = make_profile(s, 0.0)
        if omega1_perturbation:
            undamped = dataclasses.replace(
                undamped, omega1=undamped.omega1 * (1.0 + omega1_perturbation))
        err = abs(2.0 / undamped.omega1 - 2.0 * s * s) / (2.0 * s * s)
        results.append(IdentityResult("undamped_length", s, 0.0, err, 1e-14))
        for eta in eta_list:
            p = make_profile(s, eta)
            if omega1_perturbation:
                p = dataclasses.replace(p, omega1=p.omega1 * (1.0 + omega1_perturbation))
            checks = {
                "alpha_closed_form": _check_alpha(p),
                "equioscillation": _check_equioscillation(p),
                "forcing_bound": _check_forcing_bound(p),
                "stage_equivalence": _check_stages(p, rng),
                "composite_identity": _check_composite(p, rng),
            }
            for name, err in checks.items():
                results.append(IdentityResult(name, s, float(eta), float(err), tols[name]))
    return VerifyReport(results)
