"""Explicit stabilised gradient descent (ESGD) with damped Chebyshev stages.

Core pieces: ``cheb`` (stability polynomials), ``schedule`` (stage count, step
size and rates), ``solvers`` (ESGD, partitioned ESGD and the GD / AGD / CG
baselines), ``problems`` (benchmark oracles), ``analysis`` (theory checks)
and ``bench`` / ``cli`` (experiments and the command line).
"""
from .cheb import StabilityProfile, cheb_t, cheb_t_prime, make_profile, stability_b, stability_r
from .errors import (AnalysisError, ConsistencyError, DivergenceError, ESGDError,
                     EstimationError, InvalidInputError, UnsupportedProblemError)
from .schedule import (DEFAULT_ETA, ChebyshevSchedule, SpectralBounds, effective_rate,
                       make_schedule, rate_report, reference_rates, select_stages)
from .solvers import StopRule, Trace, run_agd, run_cg, run_esgd, run_gd, run_pesgd

__all__ = [
    "StabilityProfile", "cheb_t", "cheb_t_prime", "make_profile", "stability_b", "stability_r",
    "AnalysisError", "ConsistencyError", "DivergenceError", "ESGDError", "EstimationError",
    "InvalidInputError", "UnsupportedProblemError",
    "DEFAULT_ETA", "ChebyshevSchedule", "SpectralBounds", "effective_rate", "make_schedule",
    "rate_report", "reference_rates", "select_stages",
    "StopRule", "Trace", "run_agd", "run_cg", "run_esgd", "run_gd", "run_pesgd",
]
