"""Choice of stage count and step size, and the convergence-rate formulas."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cheb import StabilityProfile, make_profile
from .errors import InvalidInputError

DEFAULT_ETA = 1.17


@dataclass(frozen=True)
class SpectralBounds:
    """Curvature bounds ``ell <= eig(Hessian) <= big_l``."""

    ell: float
    big_l: float

    def __post_init__(self):
        if not (math.isfinite(self.ell) and math.isfinite(self.big_l)):
            raise InvalidInputError("spectral bounds must be finite")
        if not 0 < self.ell <= self.big_l:
            raise InvalidInputError(
                f"need 0 < ell <= L, got ell={self.ell!r}, L={self.big_l!r}"
            )

    @property
    def kappa(self) -> float:
        return self.big_l / self.ell


@dataclass(frozen=True)
class ChebyshevSchedule:
    profile: StabilityProfile
    h: float
    bounds: SpectralBounds
    mu: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)

    @property
    def s(self) -> int:
        return self.profile.s

    @property
    def eta(self) -> float:
        return self.profile.eta


@dataclass(frozen=True)
class RateReport:
    kappa: float
    eta: float
    c_esgd: float
    c_opt: float
    c_agd: float
    c_gd: float
    pesgd_c: float


def _check_eta(eta: float) -> None:
    if not (eta > 0 and math.isfinite(eta)):
        raise InvalidInputError(f"damping must be positive and finite, got {eta!r}")


def _stages_for_kappa(kappa: float, eta: float) -> int:
    if kappa < 1:
        raise InvalidInputError(f"condition number must be >= 1, got {kappa!r}")
    _check_eta(eta)
    s = math.ceil(math.sqrt((kappa - 1.0) * eta / 2.0))
    # guard against round-off pushing kappa just past 1 + 2 s^2 / eta
    while kappa > 1.0 + 2.0 * s * s / eta * (1 + 1e-15):
        s += 1
    return max(1, s)


def select_stages(bounds: SpectralBounds, eta: float) -> int:
    """Smallest ``s >= 1`` with ``kappa <= 1 + 2 s^2 / eta``."""
    return _stages_for_kappa(bounds.kappa, eta)


def make_schedule(bounds: SpectralBounds, eta: float = DEFAULT_ETA) -> ChebyshevSchedule:
    """Build the ESGD run parameters for the given curvature bounds.

    The step size places ``-h * ell`` on the inner edge ``-delta`` of the
    damped interval; the stage count makes ``h * L`` fit inside it.
    """
    s = select_stages(bounds, eta)
    profile = make_profile(s, eta)
    h = (profile.omega0 - 1.0) / (profile.omega1 * bounds.ell)
    mu, nu = profile.stage_coefficients()
    mu.setflags(write=False)
    nu.setflags(write=False)
    return ChebyshevSchedule(profile=profile, h=h, bounds=bounds, mu=mu, nu=nu)


def effective_rate(kappa: float, eta: float) -> float:
    """Per-gradient-evaluation rate ``alpha_s(eta)^(2/s)``."""
    s = _stages_for_kappa(kappa, eta)
    return make_profile(s, eta).alpha ** (2.0 / s)


def reference_rates(kappa: float) -> tuple[float, float, float]:
    """Return ``(c_opt, c_agd, c_gd)`` for condition number ``kappa``."""
    if kappa < 1:
        raise InvalidInputError(f"condition number must be >= 1, got {kappa!r}")
    rk = math.sqrt(kappa)
    c_opt = ((rk - 1.0) / (rk + 1.0)) ** 2
    c_agd = (1.0 - 2.0 / math.sqrt(3.0 * kappa + 1.0)) ** 2
    c_gd = ((kappa - 1.0) / (kappa + 1.0)) ** 2
    return c_opt, c_agd, c_gd


def pesgd_constant(s: int, eta: float) -> float:
    """``C(eta) = omega1 * alpha / (omega0 - 1)``; PESGD contracts if beta < C * gamma * ell."""
    _check_eta(eta)
    p = make_profile(s, eta)
    return p.omega1 * p.alpha / (p.omega0 - 1.0)


def beta_threshold(bounds: SpectralBounds, eta: float, gamma: float) -> float:
    s = select_stages(bounds, eta)
    return gamma * bounds.ell * pesgd_constant(s, eta)


def rate_report(kappa: float, eta: float) -> RateReport:
    c_opt, c_agd, c_gd = reference_rates(kappa)
    s = _stages_for_kappa(kappa, eta)
    return RateReport(
        kappa=kappa,
        eta=eta,
        c_esgd=effective_rate(kappa, eta),
        c_opt=c_opt,
        c_agd=c_agd,
        c_gd=c_gd,
        pesgd_c=pesgd_constant(s, eta),
    )
