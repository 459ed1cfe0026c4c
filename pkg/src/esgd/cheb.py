"""Chebyshev polynomials and the damped stability functions of ESGD.

Everything here evaluates ``T_s`` through the three-term recurrence; the
hyperbolic closed forms are only used as an independent cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, InvalidInputError

#: below this |z| the difference quotient of ``stability_b`` is replaced by its limit
B_SINGULARITY_TOL = 1e-8


def _check_finite(x) -> None:
    if not np.all(np.isfinite(np.asarray(x))):
        raise InvalidInputError("argument must be finite")


def cheb_t(s: int, x):
    """Chebyshev polynomial of the first kind ``T_s(x)``.

    Works element-wise on real or complex scalars and arrays.
    """
    if s < 0:
        raise InvalidInputError(f"degree must be nonnegative, got {s}")
    _check_finite(x)
    scalar = np.isscalar(x)
    x = np.asarray(x)
    t_prev = np.ones_like(x, dtype=np.result_type(x, float))
    if s == 0:
        return t_prev.item() if scalar else t_prev
    t_cur = x.astype(t_prev.dtype)
    for _ in range(s - 1):
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
    return t_cur.item() if scalar else t_cur


def cheb_t_all(s: int, x: float) -> np.ndarray:
    """Return ``[T_0(x), ..., T_s(x)]`` for a real scalar ``x``."""
    out = np.empty(s + 1)
    out[0] = 1.0
    if s >= 1:
        out[1] = x
    for j in range(2, s + 1):
        out[j] = 2.0 * x * out[j - 1] - out[j - 2]
    return out


def cheb_t_prime(s: int, x: float) -> float:
    """Derivative ``T_s'(x)`` of a Chebyshev polynomial at a real point."""
    if s < 1:
        raise InvalidInputError(f"degree must be >= 1, got {s}")
    _check_finite(x)
    x = float(x)
    if abs(x) > 1.0:
        theta = math.acosh(abs(x))
        val = s * math.sinh(s * theta) / math.sinh(theta)
        # T_s' has parity s - 1
        return val if x > 0 or s % 2 == 1 else -val
    theta = math.acos(x)
    sin_t = math.sin(theta)
    if abs(sin_t) < 1e-12:
        # limit at x = +-1
        return float(s * s) if x > 0 else float((-1) ** (s + 1) * s * s)
    return s * math.sin(s * theta) / sin_t


def alpha_closed_form(s: int, eta: float) -> float:
    """``1 / cosh(s * arcosh(1 + eta / s^2))``, the cross-check for ``alpha``."""
    return 1.0 / math.cosh(s * math.acosh(1.0 + eta / (s * s)))


@dataclass(frozen=True)
class StabilityProfile:
    """Damped Chebyshev stability function of ``s`` stages.

    ``R_s(z) = T_s(omega0 + omega1 z) / T_s(omega0)`` is bounded by ``alpha`` in
    absolute value on the damped interval ``[-l_damped, -delta]``.
    """

    s: int
    eta: float
    omega0: float
    omega1: float
    alpha: float
    l_damped: float
    delta: float

    def stage_coefficients(self) -> tuple[np.ndarray, np.ndarray]:
        """Stage weights ``(mu, nu)`` of the Chebyshev recursion.

        Both arrays have length ``s`` with ``mu[j - 1]`` holding ``mu_j``;
        ``nu[0]`` is unused and set to zero.
        """
        t = cheb_t_all(self.s, self.omega0)
        mu = np.empty(self.s)
        nu = np.zeros(self.s)
        mu[0] = self.omega1 / self.omega0
        for j in range(2, self.s + 1):
            ratio = t[j - 1] / t[j]
            mu[j - 1] = 2.0 * self.omega1 * ratio
            nu[j - 1] = 2.0 * self.omega0 * ratio
        return mu, nu


def make_profile(s: int, eta: float) -> StabilityProfile:
    if s < 1:
        raise InvalidInputError(f"stage count must be >= 1, got {s}")
    if not (eta >= 0 and math.isfinite(eta)):
        raise InvalidInputError(f"damping must be a finite nonnegative number, got {eta}")
    omega0 = 1.0 + eta / (s * s)
    t_s = cheb_t(s, omega0)
    slope = cheb_t_prime(s, omega0)
    omega1 = t_s / slope
    alpha = 1.0 / t_s
    ref = alpha_closed_form(s, eta)
    if abs(alpha - ref) > 1e-10 * ref:
        raise ConsistencyError(
            f"alpha from recurrence ({alpha!r}) disagrees with closed form ({ref!r})"
        )
    return StabilityProfile(
        s=s,
        eta=float(eta),
        omega0=omega0,
        omega1=omega1,
        alpha=alpha,
        # multiply by T'/T rather than divide by omega1: exact 2 s^2 when eta = 0
        l_damped=(1.0 + omega0) * slope / t_s,
        delta=(omega0 - 1.0) * slope / t_s,
    )


def stability_r(profile: StabilityProfile, z):
    """Evaluate ``R_s(z)`` for real or complex ``z`` (scalar or array)."""
    _check_finite(z)
    arg = profile.omega0 + profile.omega1 * np.asarray(z)
    out = np.asarray(cheb_t(profile.s, arg)) * profile.alpha
    return out.item() if out.ndim == 0 else out


def stability_b(profile: StabilityProfile, z):
    """Divided difference ``(R_s(z) - 1) / z``, equal to 1 at ``z = 0``.

    Scaled by ``h`` this is the forcing factor of the composite scheme,
    ``(I - R_s(-hA)) A^{-1} = h B(-hA)``, and ``|B| <= 1`` on ``[-l_damped, 0]``.
    """
    _check_finite(z)
    z = np.asarray(z, dtype=float)
    near = np.abs(z) <= B_SINGULARITY_TOL
    safe = np.where(near, 1.0, z)
    out = np.where(near, 1.0, (np.asarray(stability_r(profile, safe)) - 1.0) / safe)
    return out.item() if out.ndim == 0 else out
