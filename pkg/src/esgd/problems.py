"""Benchmark problem families and spectral-bound estimation.

Every problem exposes ``dim``, ``bounds``, ``gradient(x)`` and ``gap(x)``.
Problems with an objective also expose ``value(x)``; composite problems
additionally split the gradient into ``a_matvec`` and ``g_gradient``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla
from scipy.special import expit

from .errors import EstimationError, InvalidInputError
from .schedule import SpectralBounds

# Power iteration settings for upper curvature bounds.
POWER_RTOL = 1e-8
POWER_INFLATION = 1e-6
POWER_MAXITER = 100_000


class Problem:
    """Base class: a smooth strongly convex objective with curvature bounds."""

    dim: int
    bounds: SpectralBounds
    f_star: float | None = None
    has_objective = True

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gap(self, x: np.ndarray) -> float:
        """``f(x) - f(x*)`` when the optimum is known, otherwise ``||grad f(x)||``."""
        if self.has_objective and self.f_star is not None:
            return self.value(x) - self.f_star
        return float(np.linalg.norm(self.gradient(x)))

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)


class QuadraticProblem(Problem):
    """``f(x) = x^T A x / 2 - b^T x`` with an explicit SPD matrix."""

    def __init__(self, a: np.ndarray, b: np.ndarray, known_bounds: SpectralBounds | None = None):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or b.shape != (a.shape[0],):
            raise InvalidInputError(f"shape mismatch: A {a.shape}, b {b.shape}")
        if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
            raise InvalidInputError("A must be symmetric")
        self.a = a
        self.b = b
        self.dim = a.shape[0]
        if known_bounds is None:
            eig = np.linalg.eigvalsh(a)
            known_bounds = SpectralBounds(float(eig[0]), float(eig[-1]))
        self.bounds = known_bounds
        self._chol = sla.cho_factor(a)
        self.x_star = sla.cho_solve(self._chol, b)
        self.f_star = -0.5 * float(b @ self.x_star)

    def matvec(self, x):
        return self.a @ x

    def value(self, x):
        return 0.5 * float(x @ (self.a @ x)) - float(self.b @ x)

    def gradient(self, x):
        return self.a @ x - self.b

    def gap(self, x):
        # energy-norm form avoids cancellation in f(x) - f*
        e = x - self.x_star
        return 0.5 * float(e @ (self.a @ e))


class CompositeProblem(Problem):
    """``f(x) = x^T A x / 2 + g(x)``, split for the partitioned solver.

    ``g_value`` may be omitted when the forcing field has no potential; the
    gap then falls back to the residual norm ``||A x + g'(x)||``.
    """

    def __init__(self, a, g_gradient, bounds: SpectralBounds, beta: float = 0.0,
                 g_value=None, f_star: float | None = None):
        self.a = a
        self._g_gradient = g_gradient
        self._g_value = g_value
        self.beta = beta
        self.bounds = bounds
        self.dim = a.shape[0]
        self.has_objective = g_value is not None
        self.f_star = f_star

    def a_matvec(self, x):
        return self.a @ x

    def g_gradient(self, x):
        return self._g_gradient(x)

    def value(self, x):
        if self._g_value is None:
            raise InvalidInputError("this composite problem has no objective value")
        return 0.5 * float(x @ (self.a @ x)) + self._g_value(x)

    def gradient(self, x):
        return self.a @ x + self._g_gradient(x)


# ----------------------------------------------------------------------------
# spectral bounds


def power_iteration(matvec, dim: int, rtol: float = POWER_RTOL,
                    maxiter: int = POWER_MAXITER, seed: int = 0) -> float:
    """Largest eigenvalue of a symmetric positive semidefinite operator."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(maxiter):
        w = matvec(v)
        lam_new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        if abs(lam_new - lam) <= rtol * abs(lam_new):
            return lam_new
        lam = lam_new
    raise EstimationError(f"power iteration did not converge in {maxiter} iterations")


def estimate_bounds(operator, ell: float | None = None, mode: str = "power-iteration",
                    big_l: float | None = None) -> SpectralBounds:
    """Certify or substitute the curvature bounds of a symmetric operator.

    ``operator`` is a square matrix or an object with ``matvec`` and ``dim``.

    * ``power-iteration``: the upper bound is estimated and inflated by
      ``1 + 1e-6``; the lower bound comes from the caller's model (``ell``).
    * ``closed-form``: both bounds are taken as given.
    * ``exact``: both extreme eigenvalues of a dense matrix, the upper one
      inflated as above.

    If ``ell`` is omitted for a dense matrix, its smallest eigenvalue is used.
    """
    dense = isinstance(operator, np.ndarray)
    if dense:
        matvec, dim = (lambda v: operator @ v), operator.shape[0]
    else:
        matvec, dim = operator.matvec, operator.dim
    if mode == "power-iteration":
        big_l = power_iteration(matvec, dim) * (1.0 + POWER_INFLATION)
    elif mode == "closed-form":
        if big_l is None or ell is None:
            raise InvalidInputError("closed-form mode needs both ell and big_l")
    elif mode == "exact":
        if not dense:
            raise InvalidInputError("exact mode needs a dense matrix")
        eig = np.linalg.eigvalsh(operator)
        big_l = float(eig[-1]) * (1.0 + POWER_INFLATION)
        if ell is None:
            ell = float(eig[0])
    else:
        raise InvalidInputError(f"unknown mode {mode!r}")
    if ell is None:
        if not dense:
            raise InvalidInputError("ell must be supplied for matrix-free operators")
        ell = float(np.linalg.eigvalsh(operator)[0])
    return SpectralBounds(float(ell), float(max(big_l, ell)))


# ----------------------------------------------------------------------------
# generators


def wishart_bounds(n: int, m: int) -> SpectralBounds:
    r = math.sqrt(n / m)
    return SpectralBounds((1.0 - r) ** 2, (1.0 + r) ** 2)


def make_wishart_quadratic(n: int, m: int, seed: int = 0) -> QuadraticProblem:
    """Quadratic with ``A ~ W_n(I, m) / m`` and standard Gaussian ``b``."""
    if m <= n:
        raise InvalidInputError(f"need m > n for a definite Wishart matrix, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((m, n))
    a = (w.T @ w) / m
    a = 0.5 * (a + a.T)
    b = rng.standard_normal(n)
    return QuadraticProblem(a, b, known_bounds=wishart_bounds(n, m))


class LogisticProblem(Problem):
    """l2-regularised logistic loss ``sum log(1 + exp(-y_i xi_i^T x)) + tau |x|^2 / 2``."""

    def __init__(self, design: np.ndarray, labels: np.ndarray, tau: float):
        design = np.asarray(design, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise InvalidInputError("labels must be -1 or +1")
        if tau <= 0:
            raise InvalidInputError("tau must be positive")
        self.design = design
        self.labels = labels
        self.tau = float(tau)
        self.dim = design.shape[1]
        self._yx = design * labels[:, None]
        sigma2 = power_iteration(lambda v: design.T @ (design @ v), self.dim)
        self.bounds = SpectralBounds(self.tau, (self.tau + sigma2 / 4.0) * (1 + POWER_INFLATION))

    def value(self, x):
        margins = self._yx @ x
        return float(np.logaddexp(0.0, -margins).sum()) + 0.5 * self.tau * float(x @ x)

    def gradient(self, x):
        margins = self._yx @ x
        return -(self._yx.T @ expit(-margins)) + self.tau * x


def make_logistic(design, labels, tau: float) -> LogisticProblem:
    return LogisticProblem(design, labels, tau)


def synthetic_classification(m: int, d: int, seed: int = 0, tau: float | None = 1e-3,
                             noise: float = 0.5):
    """Ill-conditioned Gaussian design with labels from a noisy planted model.

    Column ``k`` of a standard Gaussian matrix is scaled by a geometric
    sequence running from 1 down to ``sqrt(4 tau / m)``, the scale at which a
    feature's curvature ``m s^2 / 4`` falls to the regulariser ``tau``. The
    labels come from a linear rule on the unscaled features, so the weakly
    scaled directions carry signal and the small Hessian eigenvalues sit near
    ``tau``. ``tau=None`` keeps all scales at 1.
    """
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((m, d))
    w = rng.standard_normal(d) / math.sqrt(d)
    score = raw @ w + noise * rng.standard_normal(m)
    labels = np.where(score >= 0, 1.0, -1.0)
    if tau is None:
        return raw, labels
    smallest = min(1.0, math.sqrt(4.0 * tau / m))
    return raw * np.geomspace(1.0, smallest, d), labels


def huber(t, tau: float):
    a = np.abs(t)
    return np.where(a <= tau, t * t / (2 * tau), a - tau / 2)


def huber_grad(t, tau: float):
    return np.clip(t / tau, -1.0, 1.0)


class ElasticNetProblem(Problem):
    """Least squares plus Huber-smoothed l1 and a ridge term."""

    def __init__(self, a, b, lam: float, tau: float, ell: float):
        if tau <= 0 or ell <= 0 or lam < 0:
            raise InvalidInputError("need tau > 0, ell > 0, lambda >= 0")
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim != 2 or b.shape != (a.shape[0],):
            raise InvalidInputError(f"shape mismatch: A {a.shape}, b {b.shape}")
        self.a, self.b = a, b
        self.lam, self.tau, self.ell = float(lam), float(tau), float(ell)
        self.dim = a.shape[1]
        gauss_newton = power_iteration(lambda v: a.T @ (a @ v), self.dim)
        big_l = (gauss_newton + self.lam / self.tau + self.ell) * (1 + POWER_INFLATION)
        self.bounds = SpectralBounds(self.ell, big_l)

    def value(self, x):
        r = self.a @ x - self.b
        return (0.5 * float(r @ r) + self.lam * float(huber(x, self.tau).sum())
                + 0.5 * self.ell * float(x @ x))

    def gradient(self, x):
        return (self.a.T @ (self.a @ x - self.b) + self.lam * huber_grad(x, self.tau)
                + self.ell * x)


def make_elastic_net(a, b, lam: float, tau: float, ell: float) -> ElasticNetProblem:
    return ElasticNetProblem(a, b, lam, tau, ell)


def synthetic_regression(m: int, d: int, seed: int = 0, sparsity: float = 0.1, noise: float = 0.1):
    """Gaussian matrix scaled by ``1/sqrt(d)`` and a sparse planted signal."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, d)) / math.sqrt(d)
    x0 = np.zeros(d)
    support = rng.choice(d, size=max(1, int(sparsity * d)), replace=False)
    x0[support] = rng.standard_normal(support.size)
    b = a @ x0 + noise * rng.standard_normal(m)
    return a, b


# ----------------------------------------------------------------------------
# nonlinear integro-differential boundary value problem


def laplacian_1d(d: int) -> np.ndarray:
    dx = 1.0 / (d + 1)
    a = (np.diag(np.full(d, 2.0)) - np.diag(np.ones(d - 1), 1) - np.diag(np.ones(d - 1), -1))
    return a / dx**2


def laplacian_bounds(d: int) -> SpectralBounds:
    dx = 1.0 / (d + 1)
    c = math.pi * dx / 2
    return SpectralBounds(4.0 / dx**2 * math.sin(c) ** 2, 4.0 / dx**2 * math.cos(c) ** 2)


def make_pde(d: int) -> CompositeProblem:
    """Discretised ``-u'' + int_0^1 u(s)^4 / (1 + |x - s|)^2 ds = 0``, ``u(0)=1, u(1)=0``.

    ``A`` is the Dirichlet Laplacian; the forcing field holds the quadrature of
    the integral (trapezoidal, with the ``u(0) = 1`` endpoint term) and the
    boundary contribution ``-e_1 / dx^2``. The field has no potential, so the
    problem reports residual norms instead of objective gaps.
    """
    if d < 2:
        raise InvalidInputError("need d >= 2 grid points")
    dx = 1.0 / (d + 1)
    idx = np.arange(1, d + 1)
    kernel = dx / (1.0 + dx * np.abs(idx[:, None] - idx[None, :])) ** 2
    endpoint = dx / (2.0 * (1.0 + idx * dx) ** 2)
    boundary = np.zeros(d)
    boundary[0] = 1.0 / dx**2

    def g_gradient(u):
        return endpoint + kernel @ u**4 - boundary

    prob = CompositeProblem(laplacian_1d(d), g_gradient, laplacian_bounds(d), beta=0.0)
    prob.kernel = kernel
    prob.dx = dx
    return prob


# ----------------------------------------------------------------------------
# total variation denoising


@dataclass(frozen=True)
class ImageGrid:
    width: int
    height: int
    pixels: np.ndarray  # row-major, length width * height

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInputError("image dimensions must be positive")
        if np.size(self.pixels) != self.width * self.height:
            raise InvalidInputError("pixel count does not match width * height")
        px = np.asarray(self.pixels, dtype=float)
        if not np.all(np.isfinite(px)):
            raise InvalidInputError("pixels must be finite")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise InvalidInputError("pixel intensities must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.pixels, dtype=float).reshape(self.height, self.width)

    @classmethod
    def from_array(cls, arr) -> "ImageGrid":
        arr = np.asarray(arr, dtype=float)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr.ravel().copy())


def forward_diff(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def forward_diff_adjoint(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    out = np.zeros_like(px)
    out[:, :-1] -= px[:, :-1]
    out[:, 1:] += px[:, :-1]
    out[:-1, :] -= py[:-1, :]
    out[1:, :] += py[:-1, :]
    return out


class TVProblem(Problem):
    """``|x - y|^2 / 2 + lam * sum_i sqrt(eps^2 + |(Gx)_i|^2)``.

    ``G`` is the forward difference with zero differences past the last
    row and column. Curvature lies in ``[1, 1 + 8 lam / eps]`` since
    ``|G|^2 <= 8``.
    """

    def __init__(self, noisy: ImageGrid, lam: float, eps: float):
        if eps <= 0:
            raise InvalidInputError("epsilon must be positive")
        if lam <= 0:
            raise InvalidInputError("lambda must be positive")
        self.noisy = noisy
        self.shape = (noisy.height, noisy.width)
        self.y = np.asarray(noisy.pixels, dtype=float).ravel()
        self.lam, self.eps = float(lam), float(eps)
        self.dim = self.y.size
        self.bounds = SpectralBounds(1.0, 1.0 + 8.0 * self.lam / self.eps)

    def initial_point(self):
        return self.y.copy()

    def value(self, x):
        gx, gy = forward_diff(x.reshape(self.shape))
        tv = np.sqrt(self.eps**2 + gx**2 + gy**2).sum()
        r = x - self.y
        return 0.5 * float(r @ r) + self.lam * float(tv)

    def gradient(self, x):
        gx, gy = forward_diff(x.reshape(self.shape))
        nrm = np.sqrt(self.eps**2 + gx**2 + gy**2)
        tv_grad = forward_diff_adjoint(gx / nrm, gy / nrm)
        return x - self.y + self.lam * tv_grad.ravel()


def make_tv(noisy: ImageGrid, lam: float, eps: float) -> TVProblem:
    return TVProblem(noisy, lam, eps)


def synthetic_image(size: int = 64, seed: int = 0, sigma: float = 0.1) -> tuple[ImageGrid, ImageGrid]:
    """Piecewise-constant test image (rectangles and a disk) and a noisy copy."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    img = np.full((size, size), 0.2)
    img[(xx > 0.1) & (xx < 0.45) & (yy > 0.15) & (yy < 0.6)] = 0.8
    img[(xx > 0.55) & (xx < 0.9) & (yy > 0.6) & (yy < 0.85)] = 0.5
    img[(xx - 0.68) ** 2 + (yy - 0.3) ** 2 < 0.15**2] = 1.0
    rng = np.random.default_rng(seed)
    noisy = np.clip(img + sigma * rng.standard_normal(img.shape), 0.0, 1.0)
    return ImageGrid.from_array(img), ImageGrid.from_array(noisy)
